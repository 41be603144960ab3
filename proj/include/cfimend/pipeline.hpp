// The self-healing loop and the command-line front end.
#pragma once

#include "cfimend/build.hpp"
#include "cfimend/census.hpp"
#include "cfimend/config.hpp"
#include "cfimend/coverage.hpp"
#include "cfimend/error.hpp"
#include "cfimend/escalation.hpp"
#include "cfimend/harness.hpp"
#include "cfimend/visibility.hpp"

#include <json.hpp>

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace cfimend {

enum class Phase { Building, Analyzing, Testing, Done };

std::string_view phaseName(Phase P);

struct PipelineState {
  Phase CurrentPhase = Phase::Building;
  int Iteration = 0;
  std::vector<Violation> Violations;
  std::vector<IgnorelistEntry> Entries;
  RepairLedger Ledger;
  std::map<std::string, int> TestCounts; // by FailureClass name
  std::vector<std::pair<std::string, std::string>> TestClasses;
  std::vector<std::string> Indeterminate;
  std::vector<FunctionRecord> Functions;
  IrSiteCensus Census;
  std::size_t CensusDiagnostics = 0;
  double DurationSeconds = 0;

  int openCount() const;
  int fixedCount() const;
  int unresolvableCount() const;
  int functionalCount() const;
};

/// Unrecoverable failure; carries the last build when one is to blame.
class PipelineFailure : public Error {
public:
  PipelineFailure(const std::string &What, std::optional<BuildOutcome> Build = std::nullopt)
      : Error(What), Build(std::move(Build)) {}
  const std::optional<BuildOutcome> &build() const { return Build; }

private:
  std::optional<BuildOutcome> Build;
};

struct HealOptions {
  std::ostream *Log = nullptr;
  /// Start from an empty ignorelist instead of the one left by a previous run.
  bool Fresh = false;
};

struct HealResult {
  PipelineState State;
  nlohmann::json Report;
  int NewPatches = 0;
  int NewEntries = 0; // entries created for violations seen in this run

  /// 0 when nothing is unresolvable, 1 otherwise.
  int exitCode() const { return State.unresolvableCount() > 0 ? 1 : 0; }
};

/// Baseline build and suite, CFI repair build, traced CFI suite, then the
/// escalate / rebuild / re-run loop until no violation is open, followed by
/// a full-suite confirmation and report emission. Throws PipelineFailure.
HealResult heal(const ProjectConfig &Cfg, const HealOptions &Opts = {});

/// Source files are printed relative to Root when they lie under it.
nlohmann::json violationToJson(const Violation &V, const fs::path &Root = {});
Violation violationFromJson(const nlohmann::json &J);

/// <report_dir>/state.json content; includes the rendered configuration.
nlohmann::json stateToJson(const PipelineState &St, const ProjectConfig &Cfg);
PipelineState stateFromJson(const nlohmann::json &J);

/// report.json document for a state.
nlohmann::json buildReport(const PipelineState &St, const ProjectConfig &Cfg);

/// Function table for coverage from a census, files made project-relative.
std::vector<FunctionRecord> functionRecords(const CensusResult &C, const fs::path &Root);

/// Entry point of the cfimend tool. Exit codes: 0 done, 1 done with
/// unresolvable violations, 2 failure, 64 usage error.
int cliMain(int Argc, const char *const *Argv, std::ostream &Out, std::ostream &Err);

} // namespace cfimend
