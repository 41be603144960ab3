// Per-project configuration.
//
// The configuration is a single JSON document:
//
//   {
//     "project_root": "path",              (required)
//     "configure_cmd": "./configure",      (optional)
//     "build_cmd": "make {FLAGS}",         (required)
//     "clean_cmd": "make clean",           (optional)
//     "test_cmd": "./list-tests.sh",       (required; emits TEST<TAB>id<TAB>cmd)
//     "executables": ["bin/app"],
//     "cfi_variants": ["cfi-icall"],       (required, non-empty)
//     "extra_compile_flags": ["-g"],
//     "test_timeout": 120,                 (seconds, optional)
//     "report_dir": "cfi-report",          (optional, default <root>/cfi-report)
//     "ir_dir": "path",                    (optional, default project_root)
//     "max_repair_iterations": 64          (optional)
//   }
//
// Relative paths are resolved against the directory holding the document.
#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cfimend {

namespace fs = std::filesystem;

enum class CfiVariant {
  ICall,
  VCall,
  NVCall,
  MFCall,
  CastStrict,
  DerivedCast,
  UnrelatedCast,
};

inline constexpr std::array<CfiVariant, 7> AllCfiVariants = {
    CfiVariant::ICall,      CfiVariant::VCall,       CfiVariant::NVCall,
    CfiVariant::MFCall,     CfiVariant::CastStrict,  CfiVariant::DerivedCast,
    CfiVariant::UnrelatedCast};

/// The sanitizer spelling, e.g. "cfi-icall".
std::string_view variantName(CfiVariant V);
std::optional<CfiVariant> parseVariant(std::string_view Name);

struct ProjectConfig {
  fs::path ProjectRoot;
  std::optional<std::string> ConfigureCmd;
  std::string BuildCmd;
  std::optional<std::string> CleanCmd;
  std::string TestCmd;
  std::vector<std::string> Executables;
  std::vector<CfiVariant> CfiVariants;
  std::vector<std::string> ExtraCompileFlags;
  int TestTimeoutSeconds = 120;
  fs::path ReportDir;
  fs::path IrDir;
  int MaxRepairIterations = 64;

  bool operator==(const ProjectConfig &) const = default;
};

/// Parses a configuration document. Relative paths are anchored at BaseDir.
/// Throws ConfigParseError on malformed JSON and ConfigValidationError on
/// schema violations (unknown variant, duplicate variant, wrong types).
ProjectConfig parseConfig(std::string_view Text, const fs::path &BaseDir);

/// Reads and parses a configuration file.
ProjectConfig loadConfig(const fs::path &File);

/// Renders a document that parseConfig maps back to an identical config.
std::string renderConfig(const ProjectConfig &Cfg);

/// Findings describing why Cfg cannot drive a pipeline run; empty if valid.
std::vector<std::string> validateConfig(const ProjectConfig &Cfg);

} // namespace cfimend
