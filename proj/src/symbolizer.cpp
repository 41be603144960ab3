#include "cfimend/symbolizer.hpp"
#include "cfimend/elf.hpp"
#include "cfimend/error.hpp"
#include "cfimend/process.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace cfimend {

std::string_view confidenceName(Confidence C) {
  switch (C) {
  case Confidence::Debuginfo:
    return "Debuginfo";
  case Confidence::SymbolTable:
    return "SymbolTable";
  case Confidence::BoundaryHeuristic:
    return "BoundaryHeuristic";
  }
  return "?";
}

namespace {

struct Insn {
  Address Addr;
  std::string Text;
};

bool startsWith(std::string_view S, std::string_view P) { return S.substr(0, P.size()) == P; }

bool isPadding(std::string_view T) {
  return startsWith(T, "nop") || startsWith(T, "int3") || startsWith(T, "xchg   %ax,%ax") ||
         startsWith(T, "data16") || startsWith(T, "cs nop") || startsWith(T, "(bad)");
}

bool endsFlow(std::string_view T) {
  return startsWith(T, "ret") || startsWith(T, "jmp ") || startsWith(T, "jmp\t") ||
         startsWith(T, "jmpq") || startsWith(T, "ud2") || startsWith(T, "hlt");
}

std::vector<Insn> parseObjdump(std::string_view Text) {
  std::vector<Insn> Out;
  std::istringstream In{std::string(Text)};
  std::string Line;
  while (std::getline(In, Line)) {
    std::size_t P = 0;
    while (P < Line.size() && Line[P] == ' ')
      ++P;
    std::size_t H = P;
    while (H < Line.size() && std::isxdigit(static_cast<unsigned char>(Line[H])))
      ++H;
    if (H == P || H >= Line.size() || Line[H] != ':' || H + 1 >= Line.size() ||
        Line[H + 1] != '\t')
      continue;
    Insn I;
    I.Addr = std::stoull(Line.substr(P, H - P), nullptr, 16);
    I.Text = Line.substr(H + 2);
    // With raw bytes shown there is a second tab-separated column.
    if (auto Tab = I.Text.find('\t'); Tab != std::string::npos &&
        std::all_of(I.Text.begin(), I.Text.begin() + static_cast<long>(Tab), [](char C) {
          return std::isxdigit(static_cast<unsigned char>(C)) || C == ' ';
        }))
      I.Text = I.Text.substr(Tab + 1);
    while (!I.Text.empty() && std::isspace(static_cast<unsigned char>(I.Text.back())))
      I.Text.pop_back();
    Out.push_back(std::move(I));
  }
  return Out;
}

std::optional<Address> directCallTarget(std::string_view T) {
  if (!startsWith(T, "call"))
    return std::nullopt;
  auto Sp = T.find_first_of(" \t");
  if (Sp == std::string_view::npos)
    return std::nullopt;
  auto Op = T.find_first_not_of(" \t", Sp);
  if (Op == std::string_view::npos || !std::isxdigit(static_cast<unsigned char>(T[Op])))
    return std::nullopt;
  std::size_t E = Op;
  while (E < T.size() && std::isxdigit(static_cast<unsigned char>(T[E])))
    ++E;
  return std::stoull(std::string(T.substr(Op, E - Op)), nullptr, 16);
}

std::string firstLine(const std::string &S) { return S.substr(0, S.find('\n')); }

} // namespace

std::vector<std::string>
heuristicSpansFromDisassembly(std::string_view ObjdumpText, Address Entry,
                              const std::vector<std::pair<Address, Address>> &CodeRanges) {
  auto Insns = parseObjdump(ObjdumpText);
  auto InCode = [&](Address A) {
    return std::any_of(CodeRanges.begin(), CodeRanges.end(),
                       [&](const auto &R) { return A >= R.first && A < R.second; });
  };
  std::set<Address> Entries;
  for (const auto &R : CodeRanges)
    Entries.insert(R.first);
  if (InCode(Entry))
    Entries.insert(Entry);

  std::set<Address> InsnAddrs;
  for (const auto &I : Insns)
    InsnAddrs.insert(I.Addr);
  bool AfterBreak = true; // previous instruction ended flow or was padding
  for (const auto &I : Insns) {
    if (auto T = directCallTarget(I.Text); T && InCode(*T) && InsnAddrs.count(*T))
      Entries.insert(*T);
    bool Pad = isPadding(I.Text);
    if (!Pad && AfterBreak &&
        (startsWith(I.Text, "endbr64") || startsWith(I.Text, "push   %rbp") ||
         startsWith(I.Text, "push   %r")))
      Entries.insert(I.Addr);
    AfterBreak = Pad || endsFlow(I.Text);
  }

  std::vector<std::string> Records;
  for (const auto &R : CodeRanges) {
    auto It = Entries.lower_bound(R.first);
    while (It != Entries.end() && *It < R.second) {
      auto Next = std::next(It);
      Address End = (Next != Entries.end() && *Next < R.second) ? *Next : R.second;
      Records.push_back(fmt::format("fcn {:x} {:x} fcn.{:08x}", *It, End, *It));
      It = Next;
    }
  }
  return Records;
}

std::vector<std::string> BinutilsBackend::query(const BackendRequest &Req) {
  std::vector<std::string> Records;
  if (Req.Kind == QueryKind::Functions) {
    std::string Error;
    auto Img = ElfImage::load(Req.Binary, Error);
    if (!Img) {
      Records.push_back("warn " + Error);
      return Records;
    }
    std::vector<std::pair<Address, Address>> Ranges;
    for (const auto &S : Img->codeSections())
      Ranges.emplace_back(S.Addr, S.Addr + S.Size);
    ShellCommand Cmd;
    Cmd.Script = "objdump -d --no-show-raw-insn " + shellQuote(Req.Binary.string()) +
                 " 2>/dev/null";
    ShellResult R = runShell(Cmd);
    if (R.Signalled || R.ExitCode != 0) {
      Records.push_back("warn objdump failed on " + Req.Binary.string());
      return Records;
    }
    return heuristicSpansFromDisassembly(R.Output, Img->entry(), Ranges);
  }

  ShellCommand Cmd;
  Cmd.Script = fmt::format("addr2line -f -i -e {} 0x{:x} 2>/dev/null",
                           shellQuote(Req.Binary.string()), Req.Addr);
  ShellResult R = runShell(Cmd);
  if (R.Signalled || R.ExitCode != 0) {
    Records.push_back("warn addr2line failed on " + Req.Binary.string());
    return Records;
  }
  std::istringstream In(R.Output);
  std::string Func, Loc;
  while (std::getline(In, Func) && std::getline(In, Loc)) {
    // "file:line" or "file:line (discriminator N)"
    if (auto Paren = Loc.find(" ("); Paren != std::string::npos)
      Loc.resize(Paren);
    std::string File = "??", Line = "??";
    if (auto Colon = Loc.rfind(':'); Colon != std::string::npos) {
      File = Loc.substr(0, Colon);
      Line = Loc.substr(Colon + 1);
    }
    if (Line.empty() || Line == "?" || Line == "0")
      Line = "??";
    if (File.empty() || File == "?")
      File = "??";
    Records.push_back(fmt::format("loc {} {} {}", Func.empty() ? "??" : Func, File, Line));
  }
  return Records;
}

Symbolizer::Symbolizer(std::shared_ptr<AnalysisBackend> Backend)
    : Backend(std::move(Backend)) {}

std::vector<FunctionSpan> Symbolizer::functionBoundaries(const fs::path &Binary,
                                                         std::vector<std::string> *Warnings) {
  std::error_code EC;
  std::string Key = fs::absolute(Binary, EC).lexically_normal().string();
  auto Size = fs::file_size(Binary, EC);
  auto Time = fs::last_write_time(Binary, EC);
  Key += fmt::format("|{}|{}", EC ? 0 : Size, Time.time_since_epoch().count());

  std::lock_guard<std::mutex> Guard(Mutex);
  if (auto It = SpanCache.find(Key); It != SpanCache.end())
    return It->second;

  std::vector<FunctionSpan> Spans;
  std::string Error;
  auto Img = ElfImage::load(Binary, Error);
  if (!Img) {
    if (Warnings)
      Warnings->push_back(Error);
    return Spans;
  }

  std::vector<FunctionSpan> Sym;
  for (const auto &F : Img->functionSymbols())
    if (F.Size > 0)
      Sym.push_back({F.Name, F.Value, F.Value + F.Size, true});
  // Static symbols first so that .symtab names win over .dynsym aliases.
  std::stable_sort(Sym.begin(), Sym.end(), [](const auto &A, const auto &B) {
    return A.Start < B.Start;
  });
  for (const auto &S : Sym)
    if (Spans.empty() || S.Start >= Spans.back().End)
      Spans.push_back(S);

  for (const auto &Rec : Backend->query({Binary, QueryKind::Functions, 0})) {
    std::istringstream In(Rec);
    std::string Tag;
    In >> Tag;
    if (Tag == "warn") {
      if (Warnings)
        Warnings->push_back(firstLine(Rec.substr(5)));
      continue;
    }
    if (Tag != "fcn")
      continue;
    std::string StartHex, EndHex, Label;
    if (!(In >> StartHex >> EndHex >> Label))
      continue;
    Address Start = std::stoull(StartHex, nullptr, 16);
    Address End = std::stoull(EndHex, nullptr, 16);
    // Clip to the gaps between already accepted spans.
    for (const auto &S : Spans) {
      if (S.End <= Start || S.Start >= End)
        continue;
      if (S.Start <= Start)
        Start = std::max(Start, S.End);
      else
        End = std::min(End, S.Start);
    }
    if (Start >= End)
      continue;
    FunctionSpan H{fmt::format("fcn.{:08x}", Start), Start, End, false};
    Spans.insert(std::upper_bound(Spans.begin(), Spans.end(), H,
                                  [](const auto &A, const auto &B) { return A.Start < B.Start; }),
                 H);
  }
  SpanCache[Key] = Spans;
  return Spans;
}

SymbolInfo Symbolizer::resolve(const fs::path &Binary, Address Addr) {
  if (Addr == 0)
    throw ResolutionError("cannot resolve address 0");
  auto Spans = functionBoundaries(Binary);
  auto It = std::find_if(Spans.begin(), Spans.end(),
                         [&](const auto &S) { return S.contains(Addr); });
  if (It == Spans.end())
    throw ResolutionError(
        fmt::format("address 0x{:x} lies outside every function in {}", Addr, Binary.string()));

  SymbolInfo Info;
  std::vector<std::string> Records;
  {
    std::lock_guard<std::mutex> Guard(Mutex);
    Records = Backend->query({Binary, QueryKind::LineInfo, Addr});
  }
  // The outermost inline frame owns the address.
  std::optional<std::tuple<std::string, std::string, std::string>> Outer;
  for (const auto &Rec : Records) {
    std::istringstream In(Rec);
    std::string Tag, Fn, File, Line;
    if (In >> Tag >> Fn >> File >> Line && Tag == "loc")
      Outer = std::make_tuple(Fn, File, Line);
  }
  if (Outer && std::get<1>(*Outer) != "??") {
    Info.Conf = Confidence::Debuginfo;
    Info.SourceFile = fs::path(std::get<1>(*Outer));
    if (std::get<2>(*Outer) != "??")
      Info.Line = std::stoi(std::get<2>(*Outer));
    Info.Function = It->FromSymbolTable || std::get<0>(*Outer) == "??" ? It->Name
                                                                       : std::get<0>(*Outer);
    return Info;
  }
  Info.Function = It->Name;
  Info.Conf = It->FromSymbolTable ? Confidence::SymbolTable : Confidence::BoundaryHeuristic;
  return Info;
}

std::optional<StaticAddress> Symbolizer::toStatic(const std::vector<MemoryMapping> &Maps,
                                                  Address Runtime) {
  for (const auto &M : Maps) {
    if (!M.contains(Runtime) || M.Path.empty() || M.Path.front() != '/')
      continue;
    std::string Error;
    auto Img = ElfImage::load(M.Path, Error);
    if (!Img)
      return std::nullopt;
    auto Addr = Img->fileOffsetToAddress(Runtime - M.Start + M.FileOffset);
    if (!Addr)
      return std::nullopt;
    return StaticAddress{M.Path, *Addr};
  }
  return std::nullopt;
}

} // namespace cfimend
