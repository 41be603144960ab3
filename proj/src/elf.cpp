#include "cfimend/elf.hpp"

#include <elf.h>

#include <cstring>
#include <fstream>
#include <iterator>

namespace cfimend {

namespace {

template <typename T>
bool readAt(const std::vector<char> &Data, std::uint64_t Off, T &Out) {
  if (Off > Data.size() || Data.size() - Off < sizeof(T))
    return false;
  std::memcpy(&Out, Data.data() + Off, sizeof(T));
  return true;
}

std::string cString(const std::vector<char> &Data, std::uint64_t Off, std::uint64_t Limit) {
  std::string S;
  for (std::uint64_t I = Off; I < Limit && I < Data.size() && Data[I]; ++I)
    S += Data[I];
  return S;
}

} // namespace

std::optional<ElfImage> ElfImage::load(const fs::path &Path, std::string &Error) {
  std::ifstream In(Path, std::ios::binary);
  if (!In) {
    Error = "cannot open " + Path.string();
    return std::nullopt;
  }
  std::vector<char> Data((std::istreambuf_iterator<char>(In)),
                         std::istreambuf_iterator<char>());
  Elf64_Ehdr Eh;
  if (!readAt(Data, 0, Eh) || std::memcmp(Eh.e_ident, ELFMAG, SELFMAG) != 0) {
    Error = Path.string() + ": not an ELF file";
    return std::nullopt;
  }
  if (Eh.e_ident[EI_CLASS] != ELFCLASS64 || Eh.e_ident[EI_DATA] != ELFDATA2LSB) {
    Error = Path.string() + ": only little-endian ELF64 is supported";
    return std::nullopt;
  }

  ElfImage Img;
  Img.Type = Eh.e_type;
  Img.Entry = Eh.e_entry;

  for (unsigned I = 0; I < Eh.e_phnum; ++I) {
    Elf64_Phdr Ph;
    if (!readAt(Data, Eh.e_phoff + std::uint64_t(I) * Eh.e_phentsize, Ph))
      break;
    if (Ph.p_type == PT_LOAD)
      Img.Segments.push_back({Ph.p_offset, Ph.p_vaddr, Ph.p_filesz, Ph.p_memsz, Ph.p_flags});
  }

  std::vector<Elf64_Shdr> Shdrs;
  for (unsigned I = 0; I < Eh.e_shnum; ++I) {
    Elf64_Shdr Sh;
    if (!readAt(Data, Eh.e_shoff + std::uint64_t(I) * Eh.e_shentsize, Sh))
      break;
    Shdrs.push_back(Sh);
  }
  std::uint64_t ShStrOff = 0, ShStrEnd = 0;
  if (Eh.e_shstrndx < Shdrs.size()) {
    ShStrOff = Shdrs[Eh.e_shstrndx].sh_offset;
    ShStrEnd = ShStrOff + Shdrs[Eh.e_shstrndx].sh_size;
  }
  for (const auto &Sh : Shdrs) {
    ElfSection S;
    S.Name = ShStrEnd ? cString(Data, ShStrOff + Sh.sh_name, ShStrEnd) : "";
    S.Type = Sh.sh_type;
    S.Flags = Sh.sh_flags;
    S.Addr = Sh.sh_addr;
    S.FileOffset = Sh.sh_offset;
    S.Size = Sh.sh_size;
    Img.Sections.push_back(std::move(S));
  }

  for (const auto &Sh : Shdrs) {
    if (Sh.sh_type != SHT_SYMTAB && Sh.sh_type != SHT_DYNSYM)
      continue;
    if (Sh.sh_link >= Shdrs.size() || Sh.sh_entsize < sizeof(Elf64_Sym))
      continue;
    if (Sh.sh_type == SHT_SYMTAB)
      Img.HasSymtab = true;
    const auto &StrSh = Shdrs[Sh.sh_link];
    std::uint64_t Count = Sh.sh_size / Sh.sh_entsize;
    for (std::uint64_t K = 0; K < Count; ++K) {
      Elf64_Sym Sym;
      if (!readAt(Data, Sh.sh_offset + K * Sh.sh_entsize, Sym))
        break;
      if (ELF64_ST_TYPE(Sym.st_info) != STT_FUNC && ELF64_ST_TYPE(Sym.st_info) != STT_GNU_IFUNC)
        continue;
      if (Sym.st_shndx == SHN_UNDEF || Sym.st_value == 0)
        continue;
      ElfSymbol E;
      E.Name = cString(Data, StrSh.sh_offset + Sym.st_name, StrSh.sh_offset + StrSh.sh_size);
      E.Value = Sym.st_value;
      E.Size = Sym.st_size;
      E.Dynamic = Sh.sh_type == SHT_DYNSYM;
      Img.Functions.push_back(std::move(E));
    }
  }
  return Img;
}

std::vector<ElfSection> ElfImage::codeSections() const {
  std::vector<ElfSection> Out;
  for (const auto &S : Sections)
    if ((S.Flags & SHF_EXECINSTR) && S.Type == SHT_PROGBITS && S.Size > 0)
      Out.push_back(S);
  return Out;
}

std::optional<std::uint64_t> ElfImage::fileOffsetToAddress(std::uint64_t Offset) const {
  for (const auto &Seg : Segments)
    if (Offset >= Seg.FileOffset && Offset < Seg.FileOffset + Seg.FileSize)
      return Offset - Seg.FileOffset + Seg.VirtAddr;
  return std::nullopt;
}

} // namespace cfimend
