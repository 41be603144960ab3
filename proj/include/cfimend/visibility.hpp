// Repair of link failures caused by hidden-by-default visibility.
//
// Unresolved symbols reported by the linker are traced back to their
// definition in the project sources, and the definition is marked
// __attribute__((visibility("default"))). Every patch is journaled to
// <report_dir>/visibility-patches.journal, one record per line:
//
//   <iteration> TAB <file relative to project_root> TAB <line> TAB <symbol>
//
// so that the edits can be reverted exactly.
#pragma once

#include "cfimend/build.hpp"
#include "cfimend/config.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cfimend {

inline constexpr std::string_view DefaultVisibilityAttr =
    "__attribute__((visibility(\"default\")))";

struct SourceLocation {
  fs::path File; // absolute
  int Line = 0;  // 1-based

  bool operator==(const SourceLocation &) const = default;
};

/// Result of a definition search. Location is set iff exactly one
/// definition was found; otherwise Candidates lists what was seen.
struct DefinitionLookup {
  std::optional<SourceLocation> Location;
  std::vector<SourceLocation> Candidates;

  bool found() const { return Location.has_value(); }
};

struct VisibilityPatch {
  std::string Symbol;          // as reported by the linker
  std::string DemangledSymbol;
  fs::path File;               // relative to project_root
  int Line = 0;
  std::string AppliedText;     // empty for a no-op
  int Iteration = 0;
};

struct RepairLedger {
  std::vector<VisibilityPatch> Patches;
  int IterationsBuildPhase = 0;
  int IterationsTestPhase = 0;
  int BuildsRun = 0;
};

enum class RepairPhase { Build, Test };

/// Symbols named by UndefinedReference / HiddenSymbolMismatch diagnostics,
/// deduplicated in first-occurrence order.
std::vector<std::string> extractUnresolvedSymbols(const std::vector<Diagnostic> &Diags);

/// Textual search for the definition of Symbol in C/C++ sources under Root.
/// Directories listed in Exclude are not scanned.
DefinitionLookup locateDefinition(const std::string &Symbol, const fs::path &Root,
                                  const std::vector<fs::path> &Exclude = {});

/// Inserts the default-visibility attribute before the definition at Loc.
/// Already-exported definitions yield a patch with empty AppliedText.
/// Throws RepairError("unwritable source ...") for read-only files and
/// StaleLocationError if the definition is no longer at Loc.
VisibilityPatch applyVisibilityDefault(const SourceLocation &Loc, const std::string &Symbol,
                                       const fs::path &ProjectRoot, int Iteration);

struct RepairResult {
  enum class Termination { Built, NoProgress, Exhausted };

  BuildOutcome Outcome;
  Termination How = Termination::Built;
  std::vector<Diagnostic> SurvivingDiagnostics;
  int NewPatches = 0;

  bool succeeded() const { return How == Termination::Built; }
};

/// Build, patch, rebuild until the build succeeds, an iteration adds no
/// patch, or max_repair_iterations patch iterations have been spent.
/// Patches and iteration counts accumulate in Ledger.
RepairResult repairUntilBuildable(const ProjectConfig &Cfg, const BuildMode &Mode,
                                  RepairLedger &Ledger,
                                  RepairPhase Phase = RepairPhase::Build);

fs::path journalPath(const ProjectConfig &Cfg);
void appendJournal(const ProjectConfig &Cfg, const VisibilityPatch &Patch);
std::vector<VisibilityPatch> readJournal(const ProjectConfig &Cfg);

/// Removes every journaled attribute insertion (newest first) and clears the
/// journal. Returns the number of patches reverted.
int revertPatches(const ProjectConfig &Cfg);

} // namespace cfimend
