#include "cfimend/visibility.hpp"
#include "cfimend/error.hpp"
#include "source_scan.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace cfimend {

namespace {

const std::set<std::string> SourceExtensions = {".c", ".cc", ".cpp", ".cxx", ".c++", ".C"};

std::string readFile(const fs::path &P) {
  std::ifstream In(P, std::ios::binary);
  if (!In)
    throw RepairError(fmt::format("cannot read '{}'", P.string()));
  std::stringstream SS;
  SS << In.rdbuf();
  return SS.str();
}

bool isExcluded(const fs::path &P, const std::vector<fs::path> &Exclude) {
  for (const auto &E : Exclude) {
    auto Rel = P.lexically_relative(E);
    if (!Rel.empty() && *Rel.begin() != "..")
      return true;
  }
  return false;
}

bool alreadyExported(std::string_view Decl) {
  std::string Compact;
  for (char C : Decl)
    if (!std::isspace(static_cast<unsigned char>(C)))
      Compact += C;
  return Compact.find("visibility(\"default\")") != std::string::npos;
}

} // namespace

std::vector<std::string> extractUnresolvedSymbols(const std::vector<Diagnostic> &Diags) {
  std::vector<std::string> Out;
  std::set<std::string> Seen;
  for (const auto &D : Diags) {
    if (D.DiagKind == Diagnostic::Kind::Other || !D.Symbol)
      continue;
    if (Seen.insert(*D.Symbol).second)
      Out.push_back(*D.Symbol);
  }
  return Out;
}

DefinitionLookup locateDefinition(const std::string &Symbol, const fs::path &Root,
                                  const std::vector<fs::path> &Exclude) {
  DefinitionLookup Result;
  std::string Name = detail::searchableName(Symbol);
  if (Name.empty())
    return Result;
  std::vector<fs::path> Files;
  std::error_code EC;
  fs::path AbsRoot = fs::absolute(Root).lexically_normal();
  for (auto It = fs::recursive_directory_iterator(
           AbsRoot, fs::directory_options::skip_permission_denied, EC);
       It != fs::recursive_directory_iterator(); It.increment(EC)) {
    if (EC)
      break;
    const fs::path &P = It->path();
    if (It->is_directory(EC)) {
      auto Base = P.filename().string();
      if ((!Base.empty() && Base[0] == '.') || isExcluded(P, Exclude))
        It.disable_recursion_pending();
      continue;
    }
    if (It->is_regular_file(EC) && SourceExtensions.count(P.extension().string()))
      Files.push_back(P);
  }
  std::sort(Files.begin(), Files.end());

  for (const auto &F : Files) {
    std::string Text;
    try {
      Text = readFile(F);
    } catch (const RepairError &) {
      continue;
    }
    if (Text.find(Name) == std::string::npos)
      continue;
    for (const auto &Site : detail::findDefinitions(Text, Name))
      Result.Candidates.push_back({F, Site.Line});
  }
  if (Result.Candidates.size() == 1)
    Result.Location = Result.Candidates.front();
  return Result;
}

VisibilityPatch applyVisibilityDefault(const SourceLocation &Loc, const std::string &Symbol,
                                       const fs::path &ProjectRoot, int Iteration) {
  std::error_code EC;
  auto Status = fs::status(Loc.File, EC);
  if (EC || !fs::is_regular_file(Status))
    throw RepairError(fmt::format("missing source '{}'", Loc.File.string()));
  if ((Status.permissions() & fs::perms::owner_write) == fs::perms::none)
    throw RepairError(fmt::format("unwritable source '{}'", Loc.File.string()));

  std::string Text = readFile(Loc.File);
  std::string Name = detail::searchableName(Symbol);
  auto Sites = detail::findDefinitions(Text, Name);
  auto Site = std::find_if(Sites.begin(), Sites.end(),
                           [&](const auto &S) { return S.Line == Loc.Line; });
  if (Site == Sites.end())
    throw StaleLocationError(fmt::format("definition of '{}' no longer at {}:{}", Symbol,
                                         Loc.File.string(), Loc.Line));

  VisibilityPatch Patch;
  Patch.Symbol = Symbol;
  Patch.DemangledSymbol = detail::demangle(Symbol);
  Patch.File = fs::absolute(Loc.File).lexically_normal().lexically_relative(
      fs::absolute(ProjectRoot).lexically_normal());
  Patch.Line = Loc.Line;
  Patch.Iteration = Iteration;

  std::string_view Decl(Text.data() + Site->DeclStart, Site->NameOffset - Site->DeclStart);
  if (alreadyExported(Decl))
    return Patch;

  std::string Insert = std::string(DefaultVisibilityAttr) + " ";
  Text.insert(Site->DeclStart, Insert);
  {
    std::ofstream Out(Loc.File, std::ios::binary | std::ios::trunc);
    if (!Out)
      throw RepairError(fmt::format("unwritable source '{}'", Loc.File.string()));
    Out << Text;
  }
  Patch.AppliedText = std::string(DefaultVisibilityAttr);
  return Patch;
}

fs::path journalPath(const ProjectConfig &Cfg) {
  return Cfg.ReportDir / "visibility-patches.journal";
}

void appendJournal(const ProjectConfig &Cfg, const VisibilityPatch &Patch) {
  std::error_code EC;
  fs::create_directories(Cfg.ReportDir, EC);
  std::ofstream Out(journalPath(Cfg), std::ios::app);
  Out << Patch.Iteration << '\t' << Patch.File.string() << '\t' << Patch.Line << '\t'
      << Patch.Symbol << '\n';
}

std::vector<VisibilityPatch> readJournal(const ProjectConfig &Cfg) {
  std::vector<VisibilityPatch> Out;
  std::ifstream In(journalPath(Cfg));
  std::string Line;
  while (std::getline(In, Line)) {
    std::vector<std::string> Fields;
    std::size_t Pos = 0;
    for (int I = 0; I < 3; ++I) {
      auto Tab = Line.find('\t', Pos);
      if (Tab == std::string::npos)
        break;
      Fields.push_back(Line.substr(Pos, Tab - Pos));
      Pos = Tab + 1;
    }
    if (Fields.size() != 3)
      continue;
    Fields.push_back(Line.substr(Pos));
    VisibilityPatch P;
    try {
      P.Iteration = std::stoi(Fields[0]);
      P.Line = std::stoi(Fields[2]);
    } catch (const std::exception &) {
      continue;
    }
    P.File = Fields[1];
    P.Symbol = Fields[3];
    P.DemangledSymbol = detail::demangle(P.Symbol);
    P.AppliedText = std::string(DefaultVisibilityAttr);
    Out.push_back(std::move(P));
  }
  return Out;
}

int revertPatches(const ProjectConfig &Cfg) {
  ProjectLock Lock(Cfg.ReportDir);
  auto Records = readJournal(Cfg);
  int Reverted = 0;
  std::string Needle = std::string(DefaultVisibilityAttr) + " ";
  for (auto It = Records.rbegin(); It != Records.rend(); ++It) {
    fs::path File = Cfg.ProjectRoot / It->File;
    std::string Text;
    try {
      Text = readFile(File);
    } catch (const RepairError &) {
      continue;
    }
    // Offset of the recorded line.
    std::size_t Off = 0;
    for (int L = 1; L < It->Line && Off != std::string::npos; ++L) {
      Off = Text.find('\n', Off);
      if (Off != std::string::npos)
        ++Off;
    }
    if (Off == std::string::npos)
      continue;
    std::size_t LineEnd = Text.find('\n', Off);
    std::size_t Hit = Text.find(Needle, Off);
    if (Hit == std::string::npos || (LineEnd != std::string::npos && Hit > LineEnd))
      continue;
    Text.erase(Hit, Needle.size());
    std::ofstream(File, std::ios::binary | std::ios::trunc) << Text;
    ++Reverted;
  }
  std::error_code EC;
  fs::remove(journalPath(Cfg), EC);
  return Reverted;
}

RepairResult repairUntilBuildable(const ProjectConfig &Cfg, const BuildMode &Mode,
                                  RepairLedger &Ledger, RepairPhase Phase) {
  if (!Mode.isCfi())
    throw ContractViolation("visibility repair requires a Cfi build mode");
  ProjectLock Lock(Cfg.ReportDir);

  RepairResult Result;
  int RepairIterations = 0;
  bool PatchedLastIteration = false;
  bool First = true;
  for (;;) {
    BuildStep Step{++Ledger.BuildsRun, First || PatchedLastIteration};
    First = false;
    Result.Outcome = runBuild(Cfg, Mode, Step);
    if (Result.Outcome.Succeeded) {
      Result.How = RepairResult::Termination::Built;
      return Result;
    }
    Result.SurvivingDiagnostics = Result.Outcome.Diagnostics;
    if (RepairIterations >= Cfg.MaxRepairIterations) {
      Result.How = RepairResult::Termination::Exhausted;
      return Result;
    }

    int Iteration = Phase == RepairPhase::Build ? Ledger.IterationsBuildPhase + 1
                                                : Ledger.IterationsTestPhase + 1;
    int Added = 0;
    for (const auto &Symbol : extractUnresolvedSymbols(Result.Outcome.Diagnostics)) {
      for (int Attempt = 0; Attempt < 2; ++Attempt) {
        auto Lookup = locateDefinition(Symbol, Cfg.ProjectRoot, {Cfg.ReportDir});
        if (!Lookup.found())
          break;
        try {
          VisibilityPatch P =
              applyVisibilityDefault(*Lookup.Location, Symbol, Cfg.ProjectRoot, Iteration);
          if (!P.AppliedText.empty()) {
            appendJournal(Cfg, P);
            Ledger.Patches.push_back(std::move(P));
            ++Added;
          }
          break;
        } catch (const StaleLocationError &) {
          continue;
        }
      }
    }
    PatchedLastIteration = Added > 0;
    if (Added == 0) {
      Result.How = RepairResult::Termination::NoProgress;
      return Result;
    }
    ++RepairIterations;
    Result.NewPatches += Added;
    if (Phase == RepairPhase::Build)
      ++Ledger.IterationsBuildPhase;
    else
      ++Ledger.IterationsTestPhase;
  }
}

} // namespace cfimend
