#include "cfimend/pipeline.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <ostream>
#include <sstream>

namespace cfimend {

using nlohmann::json;

std::string_view phaseName(Phase P) {
  switch (P) {
  case Phase::Building:
    return "Building";
  case Phase::Analyzing:
    return "Analyzing";
  case Phase::Testing:
    return "Testing";
  case Phase::Done:
    return "Done";
  }
  return "?";
}

namespace {

int countState(const PipelineState &St, Violation::Status S) {
  return static_cast<int>(std::count_if(St.Violations.begin(), St.Violations.end(),
                                        [&](const auto &V) { return V.State == S; }));
}

std::string hex(Address A) { return fmt::format("{:#x}", A); }

Address parseHex(const json &J) {
  return J.is_string() ? std::stoull(J.get<std::string>(), nullptr, 16) : J.get<Address>();
}

json entryToJson(const IgnorelistEntry &E) {
  return {{"kind", E.EntryKind == IgnorelistEntry::Kind::Fun ? "fun" : "src"},
          {"pattern", E.Pattern},
          {"origins", E.Origins},
          {"level", ladderLevelName(E.Level)},
          {"active", E.Active}};
}

IgnorelistEntry entryFromJson(const json &J) {
  IgnorelistEntry E;
  E.EntryKind = J.at("kind") == "fun" ? IgnorelistEntry::Kind::Fun : IgnorelistEntry::Kind::Src;
  E.Pattern = J.at("pattern");
  E.Origins = J.value("origins", std::vector<std::string>{});
  E.Level = parseLadderLevel(J.value("level", "L0")).value_or(LadderLevel::L0);
  E.Active = J.value("active", true);
  return E;
}

json frameToJson(const ResolvedFrame &F, const fs::path &Root) {
  json J = {{"runtime", hex(F.Runtime)}, {"in_project", F.InProject}};
  if (F.Static) {
    J["image"] = F.Static->Image.string();
    J["static"] = hex(F.Static->Addr);
  }
  if (F.Info) {
    J["function"] = F.Info->Function ? json(*F.Info->Function) : json();
    if (F.Info->SourceFile) {
      auto Rel = Root.empty() ? std::nullopt : projectRelativeSource(*F.Info->SourceFile, Root);
      J["file"] = Rel ? *Rel : F.Info->SourceFile->string();
      J["source_path"] = F.Info->SourceFile->string();
    }
    J["line"] = F.Info->Line ? json(*F.Info->Line) : json();
    J["confidence"] = confidenceName(F.Info->Conf);
  }
  return J;
}

ResolvedFrame frameFromJson(const json &J) {
  ResolvedFrame F;
  F.Runtime = parseHex(J.at("runtime"));
  F.InProject = J.value("in_project", false);
  if (J.contains("image"))
    F.Static = StaticAddress{J.at("image").get<std::string>(), parseHex(J.at("static"))};
  if (J.contains("confidence")) {
    SymbolInfo I;
    if (J.contains("function") && J["function"].is_string())
      I.Function = J["function"].get<std::string>();
    if (J.contains("source_path"))
      I.SourceFile = J["source_path"].get<std::string>();
    if (J.contains("line") && J["line"].is_number())
      I.Line = J["line"].get<int>();
    std::string C = J["confidence"];
    I.Conf = C == "Debuginfo"     ? Confidence::Debuginfo
             : C == "SymbolTable" ? Confidence::SymbolTable
                                  : Confidence::BoundaryHeuristic;
    F.Info = I;
  }
  return F;
}

Violation::Status statusFromName(const std::string &S) {
  if (S == "Fixed")
    return Violation::Status::Fixed;
  if (S == "Unresolvable")
    return Violation::Status::Unresolvable;
  return Violation::Status::Open;
}

} // namespace

int PipelineState::openCount() const { return countState(*this, Violation::Status::Open); }
int PipelineState::fixedCount() const { return countState(*this, Violation::Status::Fixed); }
int PipelineState::unresolvableCount() const {
  return countState(*this, Violation::Status::Unresolvable);
}
int PipelineState::functionalCount() const {
  auto It = TestCounts.find(std::string(failureClassName(FailureClass::FunctionalNonCfi)));
  return It == TestCounts.end() ? 0 : It->second;
}

json violationToJson(const Violation &V, const fs::path &Root) {
  json Rungs = json::array();
  for (const auto &R : V.Rungs)
    Rungs.push_back(R ? json(R->line()) : json());
  json J = {{"id", V.Id},
            {"tests", V.TestIds},
            {"status", violationStatusName(V.State)},
            {"level", ladderLevelName(V.Level)},
            {"image", V.Image},
            {"fault_pc", hex(V.StaticFaultPc)},
            {"trap",
             {{"signal", trapSignalName(V.Trap.Signal)},
              {"raw_pc", hex(V.Trap.RawPc)},
              {"fault_pc", hex(V.Trap.FaultPc)},
              {"binary", V.Trap.Binary}}},
            {"callee", frameToJson(V.Callee, Root)},
            {"rungs", Rungs},
            {"tried", V.Tried},
            {"notes", V.Notes},
            {"attempts", V.Attempts}};
  json Rets = json::array();
  for (auto A : V.Trap.ReturnAddresses)
    Rets.push_back(hex(A));
  J["trap"]["return_addresses"] = Rets;
  J["caller"] = V.Caller ? frameToJson(*V.Caller, Root) : json();
  J["callers_caller"] = V.CallersCaller ? frameToJson(*V.CallersCaller, Root) : json();
  J["entry"] = V.Pending ? json(V.Pending->line()) : json();
  J["pending"] = V.Pending ? entryToJson(*V.Pending) : json();
  return J;
}

Violation violationFromJson(const json &J) {
  Violation V;
  V.Id = J.at("id");
  V.TestIds = J.value("tests", std::vector<std::string>{});
  V.State = statusFromName(J.value("status", "Open"));
  V.Level = parseLadderLevel(J.value("level", "L0")).value_or(LadderLevel::L0);
  V.Image = J.value("image", "");
  V.StaticFaultPc = parseHex(J.at("fault_pc"));
  const auto &T = J.at("trap");
  V.Trap.Signal = T.value("signal", "") == trapSignalName(TrapSignal::BreakpointTrap)
                      ? TrapSignal::BreakpointTrap
                      : TrapSignal::IllegalInstruction;
  V.Trap.RawPc = parseHex(T.at("raw_pc"));
  V.Trap.FaultPc = parseHex(T.at("fault_pc"));
  V.Trap.Binary = T.value("binary", "");
  for (const auto &A : T.value("return_addresses", json::array()))
    V.Trap.ReturnAddresses.push_back(parseHex(A));
  V.Callee = frameFromJson(J.at("callee"));
  if (J.contains("caller") && !J["caller"].is_null())
    V.Caller = frameFromJson(J["caller"]);
  if (J.contains("callers_caller") && !J["callers_caller"].is_null())
    V.CallersCaller = frameFromJson(J["callers_caller"]);
  const auto &Rungs = J.value("rungs", json::array());
  for (std::size_t I = 0; I < Rungs.size() && I < V.Rungs.size(); ++I)
    if (Rungs[I].is_string()) {
      auto Parsed = parseIgnorelist(Rungs[I].get<std::string>());
      if (!Parsed.empty()) {
        Parsed[0].Level = static_cast<LadderLevel>(I);
        V.Rungs[I] = Parsed[0];
      }
    }
  V.Tried = J.value("tried", std::vector<std::string>{});
  V.Notes = J.value("notes", std::vector<std::string>{});
  V.Attempts = J.value("attempts", 0);
  if (J.contains("pending") && !J["pending"].is_null())
    V.Pending = entryFromJson(J["pending"]);
  return V;
}

json stateToJson(const PipelineState &St, const ProjectConfig &Cfg) {
  json Vs = json::array();
  for (const auto &V : St.Violations)
    Vs.push_back(violationToJson(V, Cfg.ProjectRoot));
  json Es = json::array();
  for (const auto &E : St.Entries)
    Es.push_back(entryToJson(E));
  json Patches = json::array();
  for (const auto &P : St.Ledger.Patches)
    Patches.push_back({{"symbol", P.Symbol},
                       {"demangled", P.DemangledSymbol},
                       {"file", P.File.generic_string()},
                       {"line", P.Line},
                       {"applied", P.AppliedText},
                       {"iteration", P.Iteration}});
  json Fns = json::array();
  for (const auto &F : St.Functions)
    Fns.push_back({{"name", F.Name},
                   {"file", F.File},
                   {"call_sites", F.CallSiteCount},
                   {"default_visibility", F.DefaultVisibility}});
  json Classes = json::array();
  for (const auto &[Id, C] : St.TestClasses)
    Classes.push_back({{"test", Id}, {"class", C}});
  const auto &C = St.Census;
  return {{"schema_version", ReportSchemaVersion},
          {"config", json::parse(renderConfig(Cfg))},
          {"phase", phaseName(St.CurrentPhase)},
          {"iteration", St.Iteration},
          {"violations", Vs},
          {"entries", Es},
          {"ledger",
           {{"patches", Patches},
            {"iterations_build_phase", St.Ledger.IterationsBuildPhase},
            {"iterations_test_phase", St.Ledger.IterationsTestPhase},
            {"builds_run", St.Ledger.BuildsRun}}},
          {"tests",
           {{"counts", St.TestCounts},
            {"per_test", Classes},
            {"indeterminate", St.Indeterminate}}},
          {"functions", Fns},
          {"census",
           {{"fp_calls", C.FpCalls},
            {"virtual_calls", C.VirtualCalls},
            {"callback_stores", C.CallbackStores},
            {"jt_switch", C.JtSwitch},
            {"jt_lowered", C.JtLowered},
            {"inline_asm", C.InlineAsm},
            {"diagnostics", St.CensusDiagnostics}}},
          {"duration_seconds", St.DurationSeconds}};
}

PipelineState stateFromJson(const json &J) {
  PipelineState St;
  std::string P = J.value("phase", "Building");
  for (auto Ph : {Phase::Building, Phase::Analyzing, Phase::Testing, Phase::Done})
    if (phaseName(Ph) == P)
      St.CurrentPhase = Ph;
  St.Iteration = J.value("iteration", 0);
  for (const auto &V : J.value("violations", json::array()))
    St.Violations.push_back(violationFromJson(V));
  for (const auto &E : J.value("entries", json::array()))
    St.Entries.push_back(entryFromJson(E));
  const auto &L = J.value("ledger", json::object());
  for (const auto &Pj : L.value("patches", json::array())) {
    VisibilityPatch Patch;
    Patch.Symbol = Pj.value("symbol", "");
    Patch.DemangledSymbol = Pj.value("demangled", "");
    Patch.File = Pj.value("file", "");
    Patch.Line = Pj.value("line", 0);
    Patch.AppliedText = Pj.value("applied", "");
    Patch.Iteration = Pj.value("iteration", 0);
    St.Ledger.Patches.push_back(std::move(Patch));
  }
  St.Ledger.IterationsBuildPhase = L.value("iterations_build_phase", 0);
  St.Ledger.IterationsTestPhase = L.value("iterations_test_phase", 0);
  St.Ledger.BuildsRun = L.value("builds_run", 0);
  const auto &T = J.value("tests", json::object());
  St.TestCounts = T.value("counts", std::map<std::string, int>{});
  for (const auto &C : T.value("per_test", json::array()))
    St.TestClasses.emplace_back(C.at("test"), C.at("class"));
  St.Indeterminate = T.value("indeterminate", std::vector<std::string>{});
  for (const auto &F : J.value("functions", json::array()))
    St.Functions.push_back({F.at("name"), F.value("file", ""), F.value("call_sites", 0ull),
                            F.value("default_visibility", false)});
  const auto &C = J.value("census", json::object());
  St.Census = {C.value("fp_calls", 0ull),  C.value("virtual_calls", 0ull),
               C.value("callback_stores", 0ull), C.value("jt_switch", 0ull),
               C.value("jt_lowered", 0ull), C.value("inline_asm", 0ull)};
  St.CensusDiagnostics = C.value("diagnostics", std::size_t{0});
  St.DurationSeconds = J.value("duration_seconds", 0.0);
  return St;
}

std::vector<FunctionRecord> functionRecords(const CensusResult &C, const fs::path &Root) {
  std::vector<FunctionRecord> Out;
  for (const auto &F : C.Functions) {
    FunctionRecord R;
    R.Name = F.Name;
    if (!F.SourceFile.empty())
      R.File = projectRelativeSource(F.SourceFile, Root).value_or(F.SourceFile);
    R.CallSiteCount = totalSites(F.Sites);
    R.DefaultVisibility = F.DefaultVisibility;
    Out.push_back(std::move(R));
  }
  return Out;
}

json buildReport(const PipelineState &St, const ProjectConfig &Cfg) {
  auto Core = computeCoverage(St.Functions, St.Entries, St.Ledger.Patches);
  auto triple = [](const CoverageTriple &T) {
    return json{{"protected_hundredths", T.Protected},
                {"default_visibility_hundredths", T.Default},
                {"ignored_hundredths", T.Ignored},
                {"protected", std::stod(formatHundredths(T.Protected))},
                {"default_visibility", std::stod(formatHundredths(T.Default))},
                {"ignored", std::stod(formatHundredths(T.Ignored))}};
  };
  std::uint64_t Sites = 0;
  for (const auto &F : St.Functions)
    Sites += F.CallSiteCount;
  json Variants = json::array();
  for (auto V : Cfg.CfiVariants)
    Variants.push_back(variantName(V));
  json Ignorelist = json::array();
  std::istringstream In(renderIgnorelist(St.Entries));
  for (std::string L; std::getline(In, L);)
    Ignorelist.push_back(L);
  json State = stateToJson(St, Cfg);
  json Census = State["census"];
  Census["total_sites"] = totalSites(St.Census);
  json Tests = State["tests"];
  Tests["total"] = St.TestClasses.size() + St.Indeterminate.size();
  return {{"schema_version", ReportSchemaVersion},
          {"project_root", Cfg.ProjectRoot.string()},
          {"cfi_variants", Variants},
          {"phase", phaseName(St.CurrentPhase)},
          {"duration_seconds", St.DurationSeconds},
          {"duration", formatDuration(St.DurationSeconds)},
          {"summary",
           {{"violations", St.Violations.size()},
            {"fixed", St.fixedCount()},
            {"unresolvable", St.unresolvableCount()},
            {"functional", St.functionalCount()},
            {"iterations", St.Iteration}}},
          {"coverage",
           {{"per_function", triple(Core.PerFunction)},
            {"per_call_site", triple(Core.PerCallSite)},
            {"total_cfi_coverage_ir", std::stod(formatHundredths(Core.PerCallSite.Protected))},
            {"functions", St.Functions.size()},
            {"call_sites", Sites}}},
          {"census", Census},
          {"tests", Tests},
          {"violations", State["violations"]},
          {"ledger", State["ledger"]},
          {"ignorelist", Ignorelist}};
}

namespace {

class Healer {
public:
  Healer(const ProjectConfig &Cfg, const HealOptions &Opts)
      : Cfg(Cfg), Opts(Opts), Start(std::chrono::steady_clock::now()) {}

  HealResult run();

private:
  template <typename... Args> void log(fmt::format_string<Args...> F, Args &&...A) {
    if (Opts.Log)
      *Opts.Log << "[cfimend] " << fmt::format(F, std::forward<Args>(A)...) << std::endl;
  }

  void persist() {
    St.DurationSeconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - Start).count();
    std::ofstream Out(Cfg.ReportDir / "state.json", std::ios::trunc);
    Out << stateToJson(St, Cfg).dump(2) << "\n";
  }

  std::string trapKey(const TrapEvent &T) {
    if (auto S = Sym.toStatic(T.Mappings, T.FaultPc))
      return violationKey(S->Image.string(), S->Addr);
    return violationKey(T.Binary, T.FaultPc);
  }

  bool baselinePassed(const std::string &TestId) const {
    auto It = std::find_if(BaseResults.begin(), BaseResults.end(),
                           [&](const auto &R) { return R.TestId == TestId; });
    return It != BaseResults.end() && It->Passed;
  }

  // Folds CFI traps of Results into the violation set.
  void observe(const std::vector<TestResult> &Results) {
    for (const auto &R : Results) {
      auto It = std::find_if(CfiResults.begin(), CfiResults.end(),
                             [&](const auto &O) { return O.TestId == R.TestId; });
      if (It != CfiResults.end())
        *It = R;
      else
        CfiResults.push_back(R);
      if (!R.TrappedCfi || !baselinePassed(R.TestId))
        continue;
      const TrapEvent &T = *R.Outcome.Trap;
      std::string Key = trapKey(T);
      auto V = std::find_if(St.Violations.begin(), St.Violations.end(),
                            [&](const auto &V) { return V.key() == Key; });
      if (V == St.Violations.end()) {
        St.Violations.push_back(makeViolation(T, R.TestId, Cfg.ProjectRoot, Sym));
        const auto &N = St.Violations.back();
        log("violation {} in test {} at {} ({})", N.Id, R.TestId, hex(N.StaticFaultPc),
            N.Callee.Info && N.Callee.Info->Function ? *N.Callee.Info->Function : "?");
        continue;
      }
      if (std::find(V->TestIds.begin(), V->TestIds.end(), R.TestId) == V->TestIds.end())
        V->TestIds.push_back(R.TestId);
      if (V->State == Violation::Status::Fixed && V->Pending) {
        // Its entry no longer suppresses the trap; continue up the ladder.
        log("violation {} recurred after being fixed at {}", V->Id, ladderLevelName(V->Level));
        retireOrigin(St.Entries, *V->Pending, V->Id);
        V->State = Violation::Status::Open;
        V->Pending.reset();
        V->Level = nextLevel(V->Level);
      }
    }
  }

  BuildOutcome cfiBuild(RepairPhase Phase) {
    writeIgnorelist(Cfg.ReportDir, St.Entries);
    auto Before = St.Ledger.Patches.size();
    auto R = repairUntilBuildable(Cfg, Mode, St.Ledger, Phase);
    NewPatches += static_cast<int>(St.Ledger.Patches.size() - Before);
    if (!R.succeeded())
      throw PipelineFailure(
          fmt::format("CFI build failed after visibility repair ({})",
                      R.How == RepairResult::Termination::Exhausted ? "iteration budget exhausted"
                                                                    : "no repairable diagnostic"),
          R.Outcome);
    LastBuilt = renderIgnorelist(St.Entries);
    LastOutcome = R.Outcome;
    return R.Outcome;
  }

  const ProjectConfig &Cfg;
  const HealOptions &Opts;
  std::chrono::steady_clock::time_point Start;
  PipelineState St;
  Symbolizer Sym;
  BuildMode Mode;
  std::vector<TestCase> Tests;
  std::vector<TestResult> BaseResults;
  std::vector<TestResult> CfiResults;
  std::string LastBuilt;
  BuildOutcome LastOutcome;
  int NewPatches = 0;
};

HealResult Healer::run() {
  std::error_code EC;
  fs::create_directories(Cfg.ReportDir, EC);
  if (auto Findings = validateConfig(Cfg); !Findings.empty()) {
    std::string All;
    for (const auto &F : Findings)
      All += "\n  " + F;
    throw PipelineFailure("invalid configuration:" + All);
  }

  St.CurrentPhase = Phase::Building;
  log("baseline build");
  BuildOutcome Base = runBuild(Cfg, BuildMode::baseline(), {1, true});
  if (!Base.Succeeded)
    throw PipelineFailure("baseline build failed; see " + Base.LogFile.string(), Base);
  Tests = enumerateTests(Cfg);
  St.CurrentPhase = Phase::Testing;
  log("baseline suite: {} tests", Tests.size());
  BaseResults = runSuite(Cfg, Base, Tests);

  if (!Opts.Fresh && fs::exists(ignorelistPath(Cfg.ReportDir))) {
    std::ifstream In(ignorelistPath(Cfg.ReportDir));
    std::stringstream SS;
    SS << In.rdbuf();
    for (auto &E : parseIgnorelist(SS.str())) {
      E.Origins = {"previous-run"};
      St.Entries = mergeEntry(std::move(St.Entries), E);
    }
    if (!St.Entries.empty())
      log("reusing {} ignorelist entries from a previous run", St.Entries.size());
  }
  Mode = BuildMode::cfi(Cfg.CfiVariants, ignorelistPath(Cfg.ReportDir));

  St.CurrentPhase = Phase::Building;
  log("CFI build");
  BuildOutcome Build = cfiBuild(RepairPhase::Build);
  St.CurrentPhase = Phase::Testing;
  log("CFI suite");
  observe(runSuite(Cfg, Build, Tests));
  std::string LastFullSuite = LastBuilt;
  persist();

  for (;;) {
    while (St.openCount() > 0) {
      if (St.Iteration >= Cfg.MaxRepairIterations) {
        for (auto &V : St.Violations)
          if (V.State == Violation::Status::Open) {
            V.State = Violation::Status::Unresolvable;
            V.Notes.push_back("repair iteration budget exhausted");
            if (V.Pending)
              retireOrigin(St.Entries, *V.Pending, V.Id);
            V.Pending.reset();
          }
        break;
      }
      ++St.Iteration;
      St.CurrentPhase = Phase::Analyzing;
      std::vector<std::size_t> Trying;
      std::set<std::string> Affected;
      for (std::size_t I = 0; I < St.Violations.size(); ++I) {
        auto &V = St.Violations[I];
        if (V.State != Violation::Status::Open)
          continue;
        auto E = nextScope(V);
        if (!E) {
          log("violation {} is unresolvable", V.Id);
          continue;
        }
        log("iteration {}: {} -> {} ({})", St.Iteration, V.Id, E->line(),
            ladderLevelName(E->Level));
        St.Entries = mergeEntry(std::move(St.Entries), *E);
        Trying.push_back(I);
        Affected.insert(V.TestIds.begin(), V.TestIds.end());
      }
      persist();
      if (Trying.empty())
        break;

      St.CurrentPhase = Phase::Building;
      BuildOutcome Rebuilt = cfiBuild(RepairPhase::Test);
      St.CurrentPhase = Phase::Testing;
      auto Rerun = runSuite(Cfg, Rebuilt, Tests, &Affected);
      std::set<std::string> Recurring;
      for (const auto &R : Rerun)
        if (R.TrappedCfi)
          Recurring.insert(trapKey(*R.Outcome.Trap));
      for (auto I : Trying) {
        auto &V = St.Violations[I];
        bool Recurred = Recurring.count(V.key()) > 0;
        auto Tried = V.Level;
        if (auto Retired = recordOutcome(V, Recurred))
          retireOrigin(St.Entries, *Retired, V.Id);
        log("{}: {} at {}", V.Id, Recurred ? "trap recurred" : "fixed", ladderLevelName(Tried));
      }
      // Traps at new addresses become violations of their own.
      observe(Rerun);
      persist();
    }

    std::string Current = renderIgnorelist(St.Entries);
    if (Current == LastFullSuite)
      break;
    // Confirm the final list against the whole suite.
    log("confirmation run");
    St.CurrentPhase = Phase::Building;
    BuildOutcome Final = Current == LastBuilt ? LastOutcome : cfiBuild(RepairPhase::Test);
    St.CurrentPhase = Phase::Testing;
    observe(runSuite(Cfg, Final, Tests));
    LastFullSuite = LastBuilt;
    persist();
    if (St.openCount() == 0)
      break;
  }

  auto Diff = diffSuites(BaseResults, CfiResults);
  St.TestCounts.clear();
  for (auto C : {FailureClass::Pass, FailureClass::BaselineFailure,
                 FailureClass::CfiPolicyViolation, FailureClass::FunctionalNonCfi})
    St.TestCounts[std::string(failureClassName(C))] = Diff.count(C);
  St.TestClasses.clear();
  for (const auto &[Id, C] : Diff.PerTest)
    St.TestClasses.emplace_back(Id, std::string(failureClassName(C)));
  St.Indeterminate = Diff.Indeterminate;

  std::error_code DirEC;
  if (fs::is_directory(Cfg.IrDir, DirEC)) {
    auto C = censusDirectory(Cfg.IrDir);
    St.Census = C.Totals;
    St.CensusDiagnostics = C.Diagnostics.size();
    St.Functions = functionRecords(C, Cfg.ProjectRoot);
    if (!C.Diagnostics.empty()) {
      std::ofstream Side(Cfg.ReportDir / "census-diagnostics.txt", std::ios::trunc);
      for (const auto &D : C.Diagnostics)
        Side << D.Line << "\t" << D.Reason << "\t" << D.Text << "\n";
    }
  }

  St.CurrentPhase = Phase::Done;
  writeIgnorelist(Cfg.ReportDir, St.Entries);
  persist();
  HealResult Result;
  Result.Report = buildReport(St, Cfg);
  emitReport(Result.Report, Cfg.ReportDir);
  Result.NewPatches = NewPatches;
  Result.NewEntries = 0;
  for (const auto &E : St.Entries)
    if (E.Active &&
        std::find(E.Origins.begin(), E.Origins.end(), "previous-run") == E.Origins.end())
      ++Result.NewEntries;
  Result.State = St;
  log("done: {} violations, {} fixed, {} unresolvable", St.Violations.size(), St.fixedCount(),
      St.unresolvableCount());
  return Result;
}

} // namespace

HealResult heal(const ProjectConfig &Cfg, const HealOptions &Opts) {
  Healer H(Cfg, Opts);
  return H.run();
}

} // namespace cfimend
