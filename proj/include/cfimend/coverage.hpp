// Enforcement coverage and report emission.
//
// report.json is the canonical form (schema_version 1); report.html is
// rendered from the JSON alone, so regenerating it is byte-stable.
#pragma once

#include "cfimend/census.hpp"
#include "cfimend/ignorelist.hpp"
#include "cfimend/visibility.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace cfimend {

inline constexpr int ReportSchemaVersion = 1;

enum class EnforcementStatus { Protected, DefaultVisibility, Ignored };

std::string_view enforcementStatusName(EnforcementStatus S);

struct FunctionRecord {
  std::string Name;
  std::string File; // relative to project_root
  std::uint64_t CallSiteCount = 0;
  bool DefaultVisibility = false;
};

/// Percentages in hundredths (10000 = 100.00%).
struct CoverageTriple {
  std::int64_t Protected = 10000;
  std::int64_t Default = 0;
  std::int64_t Ignored = 0;

  std::int64_t sum() const { return Protected + Default + Ignored; }
  bool operator==(const CoverageTriple &) const = default;
};

/// Num * 10000 / Den rounded half to even.
std::int64_t hundredthsHalfEven(std::uint64_t Num, std::uint64_t Den);

/// Rounds each share half-even, then lets the largest component absorb the
/// residual so the triple sums to exactly 10000. An all-zero input yields
/// (10000, 0, 0).
CoverageTriple reconcile(std::uint64_t Protected, std::uint64_t Default, std::uint64_t Ignored);

/// "86.29" for 8629.
std::string formatHundredths(std::int64_t V);

/// Ignored if any active entry matches (fun: by name, src: by file), else
/// DefaultVisibility if the function was patched or is exported, else
/// Protected.
EnforcementStatus statusOf(const FunctionRecord &F, const std::vector<IgnorelistEntry> &Entries,
                           const std::vector<VisibilityPatch> &Patches);

struct CoverageCore {
  CoverageTriple PerFunction;
  CoverageTriple PerCallSite;
  std::map<EnforcementStatus, std::uint64_t> FunctionCounts;
  std::map<EnforcementStatus, std::uint64_t> CallSiteCounts;
};

/// Functions weigh equally per function and by CallSiteCount per call site;
/// functions without call sites only affect the per-function triple.
CoverageCore computeCoverage(const std::vector<FunctionRecord> &Functions,
                             const std::vector<IgnorelistEntry> &Entries,
                             const std::vector<VisibilityPatch> &Patches);

/// hh:mm:ss, hours unbounded.
std::string formatDuration(double Seconds);

/// HTML projection of a report.json document.
std::string renderHtml(const nlohmann::json &Report);

enum class ReportFormat { Json, Html };

/// Writes report.json and/or report.html into Dir. Throws EmissionError if
/// Dir cannot be created or written.
std::vector<fs::path> emitReport(const nlohmann::json &Report, const fs::path &Dir,
                                 const std::set<ReportFormat> &Formats = {ReportFormat::Json,
                                                                          ReportFormat::Html});

} // namespace cfimend
