#include "cfimend/ignorelist.hpp"
#include "cfimend/build.hpp"
#include "cfimend/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace cfimend {

std::string_view ladderLevelName(LadderLevel L) {
  static constexpr std::string_view Names[] = {"L0", "L1", "L2", "L3", "L4", "L5"};
  return Names[static_cast<int>(L)];
}

std::optional<LadderLevel> parseLadderLevel(std::string_view Name) {
  for (int I = 0; I <= 5; ++I)
    if (ladderLevelName(static_cast<LadderLevel>(I)) == Name)
      return static_cast<LadderLevel>(I);
  return std::nullopt;
}

std::string IgnorelistEntry::line() const {
  return (EntryKind == Kind::Fun ? "fun:" : "src:") + Pattern;
}

std::string renderIgnorelist(const std::vector<IgnorelistEntry> &Entries) {
  std::vector<std::string> Lines;
  for (const auto &E : Entries)
    if (E.Active)
      Lines.push_back(E.line());
  // "fun:" sorts before "src:", so plain string order is (kind, pattern).
  std::sort(Lines.begin(), Lines.end());
  Lines.erase(std::unique(Lines.begin(), Lines.end()), Lines.end());
  std::string Out;
  for (const auto &L : Lines)
    Out += L + "\n";
  return Out;
}

std::vector<IgnorelistEntry> parseIgnorelist(std::string_view Text) {
  std::vector<IgnorelistEntry> Out;
  std::istringstream In{std::string(Text)};
  std::string Line;
  int LineNo = 0;
  while (std::getline(In, Line)) {
    ++LineNo;
    if (!Line.empty() && Line.back() == '\r')
      Line.pop_back();
    if (Line.empty() || Line[0] == '#')
      continue;
    IgnorelistEntry E;
    if (Line.rfind("fun:", 0) == 0) {
      E.EntryKind = IgnorelistEntry::Kind::Fun;
      E.Level = LadderLevel::L0;
    } else if (Line.rfind("src:", 0) == 0) {
      E.EntryKind = IgnorelistEntry::Kind::Src;
      E.Level = LadderLevel::L3;
    } else {
      throw Error(fmt::format("ignorelist line {}: expected fun: or src:, got '{}'", LineNo, Line));
    }
    E.Pattern = Line.substr(4);
    if (E.Pattern.empty())
      throw Error(fmt::format("ignorelist line {}: empty pattern", LineNo));
    Out = mergeEntry(std::move(Out), E);
  }
  return Out;
}

std::vector<IgnorelistEntry> mergeEntry(std::vector<IgnorelistEntry> Existing,
                                        const IgnorelistEntry &New) {
  auto It = std::find_if(Existing.begin(), Existing.end(),
                         [&](const auto &E) { return E.sameRule(New); });
  if (It == Existing.end()) {
    Existing.push_back(New);
    return Existing;
  }
  for (const auto &O : New.Origins)
    if (std::find(It->Origins.begin(), It->Origins.end(), O) == It->Origins.end())
      It->Origins.push_back(O);
  if (New.Active && !It->Active) {
    It->Active = true;
    It->Level = New.Level;
  }
  return Existing;
}

bool retireOrigin(std::vector<IgnorelistEntry> &Entries, const IgnorelistEntry &Rule,
                  const std::string &Origin) {
  for (auto &E : Entries) {
    if (!E.sameRule(Rule))
      continue;
    std::erase(E.Origins, Origin);
    if (E.Origins.empty() && E.Active) {
      E.Active = false;
      return true;
    }
  }
  return false;
}

fs::path ignorelistPath(const fs::path &ReportDir) { return ReportDir / "cfi.ignorelist"; }

void writeIgnorelist(const fs::path &ReportDir, const std::vector<IgnorelistEntry> &Entries) {
  fs::create_directories(ReportDir);
  ProjectLock Lock(ReportDir);
  auto Path = ignorelistPath(ReportDir);
  auto Tmp = Path;
  Tmp += ".tmp";
  {
    std::ofstream Out(Tmp, std::ios::binary | std::ios::trunc);
    if (!Out)
      throw Error("cannot write " + Tmp.string());
    Out << renderIgnorelist(Entries);
  }
  fs::rename(Tmp, Path);
}

} // namespace cfimend
