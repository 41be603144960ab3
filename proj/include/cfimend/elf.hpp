// Minimal ELF64 little-endian reader: segments, sections, function symbols.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cfimend {

namespace fs = std::filesystem;

struct ElfSegment {
  std::uint64_t FileOffset = 0;
  std::uint64_t VirtAddr = 0;
  std::uint64_t FileSize = 0;
  std::uint64_t MemSize = 0;
  std::uint32_t Flags = 0;
};

struct ElfSection {
  std::string Name;
  std::uint32_t Type = 0;
  std::uint64_t Flags = 0;
  std::uint64_t Addr = 0;
  std::uint64_t FileOffset = 0;
  std::uint64_t Size = 0;
};

struct ElfSymbol {
  std::string Name;
  std::uint64_t Value = 0;
  std::uint64_t Size = 0;
  bool Dynamic = false;
};

class ElfImage {
public:
  /// Parses Path; on failure returns nullopt and sets Error.
  static std::optional<ElfImage> load(const fs::path &Path, std::string &Error);

  std::uint64_t entry() const { return Entry; }
  bool isPositionIndependent() const { return Type == 3; } // ET_DYN
  const std::vector<ElfSegment> &loadSegments() const { return Segments; }
  const std::vector<ElfSection> &sections() const { return Sections; }
  /// Defined STT_FUNC symbols from .symtab and .dynsym.
  const std::vector<ElfSymbol> &functionSymbols() const { return Functions; }
  bool hasStaticSymbols() const { return HasSymtab; }

  /// Executable sections (SHF_EXECINSTR) with their address ranges.
  std::vector<ElfSection> codeSections() const;

  /// Link-time address of a file offset inside a PT_LOAD segment.
  std::optional<std::uint64_t> fileOffsetToAddress(std::uint64_t Offset) const;

private:
  std::uint16_t Type = 0;
  std::uint64_t Entry = 0;
  bool HasSymtab = false;
  std::vector<ElfSegment> Segments;
  std::vector<ElfSection> Sections;
  std::vector<ElfSymbol> Functions;
};

} // namespace cfimend
