// Baseline and CFI builds of the target project.
#pragma once

#include "cfimend/config.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cfimend {

struct BuildMode {
  enum class Kind { Baseline, Cfi };

  Kind ModeKind = Kind::Baseline;
  std::optional<fs::path> IgnorelistPath;
  std::vector<CfiVariant> Variants;

  static BuildMode baseline() { return {}; }
  static BuildMode cfi(std::vector<CfiVariant> Variants, fs::path Ignorelist) {
    return {Kind::Cfi, std::move(Ignorelist), std::move(Variants)};
  }

  bool isCfi() const { return ModeKind == Kind::Cfi; }
  std::string_view name() const { return isCfi() ? "cfi" : "baseline"; }
};

struct Diagnostic {
  enum class Kind { UndefinedReference, HiddenSymbolMismatch, Other };

  Kind DiagKind = Kind::Other;
  std::optional<std::string> Symbol;
  std::optional<std::string> SourceObject;
  std::string Message;

  bool operator==(const Diagnostic &) const = default;
};

std::string_view diagnosticKindName(Diagnostic::Kind K);

struct BuildOutcome {
  bool Succeeded = false;
  std::string RawLog;
  std::vector<Diagnostic> Diagnostics;
  std::vector<fs::path> ProducedExecutables;
  double WallSeconds = 0;
  fs::path LogFile;
};

/// Compiler flags for a build mode. Baseline yields ExtraFlags only. Cfi
/// yields -flto, -fvisibility=hidden, one -fsanitize= list in variant order,
/// -fsanitize-ignorelist=<path>, -fno-omit-frame-pointer, then ExtraFlags.
/// Throws ContractViolation for a Cfi mode without ignorelist or variants.
std::vector<std::string> composeFlags(const BuildMode &Mode,
                                      const std::vector<std::string> &ExtraFlags = {});

/// Extracts linker diagnostics. Recognized grammars (GNU ld, gold, LLD):
///
///   ... undefined reference to `sym'          -> UndefinedReference
///   ... error: undefined symbol: sym           -> UndefinedReference
///   ... error: undefined hidden symbol: sym    -> HiddenSymbolMismatch
///   ... hidden symbol `sym' in obj is referenced by DSO
///                                              -> HiddenSymbolMismatch
///   ... hidden symbol `sym' isn't defined     -> HiddenSymbolMismatch
///   ... non-exported symbol 'sym' in 'obj' is referenced by DSO 'lib'
///                                              -> HiddenSymbolMismatch
///
/// Any other line containing "error:" becomes an Other diagnostic.
std::vector<Diagnostic> parseDiagnostics(std::string_view RawLog);

struct BuildStep {
  int Iteration = 0;
  bool RunConfigure = true;
};

/// Runs clean_cmd, configure_cmd and build_cmd from project_root with the
/// composed flags exported as CFLAGS/CXXFLAGS/LDFLAGS and substituted for
/// {FLAGS}. The captured log is written to
/// <report_dir>/build-<mode>-<iteration>.log. A failing build is reported
/// through BuildOutcome; a command that cannot be executed throws
/// OrchestrationError.
BuildOutcome runBuild(const ProjectConfig &Cfg, const BuildMode &Mode,
                      const BuildStep &Step = {});

/// Advisory lock on <report_dir>/.cfimend.lock. Reentrant within a process.
class ProjectLock {
public:
  explicit ProjectLock(const fs::path &ReportDir);
  ~ProjectLock();
  ProjectLock(const ProjectLock &) = delete;
  ProjectLock &operator=(const ProjectLock &) = delete;

private:
  std::string Key;
};

} // namespace cfimend
