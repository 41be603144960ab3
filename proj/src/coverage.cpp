#include "cfimend/coverage.hpp"
#include "cfimend/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

namespace cfimend {

std::string_view enforcementStatusName(EnforcementStatus S) {
  switch (S) {
  case EnforcementStatus::Protected:
    return "Protected";
  case EnforcementStatus::DefaultVisibility:
    return "DefaultVisibility";
  case EnforcementStatus::Ignored:
    return "Ignored";
  }
  return "?";
}

std::int64_t hundredthsHalfEven(std::uint64_t Num, std::uint64_t Den) {
  if (Den == 0)
    return 0;
  unsigned __int128 Scaled = static_cast<unsigned __int128>(Num) * 10000u;
  auto Q = static_cast<std::int64_t>(Scaled / Den);
  auto R = static_cast<std::uint64_t>(Scaled % Den);
  unsigned __int128 Twice = static_cast<unsigned __int128>(R) * 2u;
  if (Twice > Den || (Twice == Den && (Q & 1)))
    ++Q;
  return Q;
}

CoverageTriple reconcile(std::uint64_t Protected, std::uint64_t Default, std::uint64_t Ignored) {
  std::uint64_t Total = Protected + Default + Ignored;
  if (Total == 0)
    return {};
  std::array<std::int64_t, 3> V = {hundredthsHalfEven(Protected, Total),
                                   hundredthsHalfEven(Default, Total),
                                   hundredthsHalfEven(Ignored, Total)};
  std::int64_t Residual = 10000 - (V[0] + V[1] + V[2]);
  auto Largest = std::max_element(V.begin(), V.end());
  *Largest += Residual;
  return {V[0], V[1], V[2]};
}

std::string formatHundredths(std::int64_t V) {
  return fmt::format("{}{}.{:02}", V < 0 ? "-" : "", std::abs(V) / 100, std::abs(V) % 100);
}

EnforcementStatus statusOf(const FunctionRecord &F, const std::vector<IgnorelistEntry> &Entries,
                           const std::vector<VisibilityPatch> &Patches) {
  auto File = fs::path(F.File).lexically_normal().generic_string();
  for (const auto &E : Entries) {
    if (!E.Active)
      continue;
    if (E.EntryKind == IgnorelistEntry::Kind::Fun && E.Pattern == F.Name)
      return EnforcementStatus::Ignored;
    if (E.EntryKind == IgnorelistEntry::Kind::Src && !File.empty() &&
        fs::path(E.Pattern).lexically_normal().generic_string() == File)
      return EnforcementStatus::Ignored;
  }
  if (F.DefaultVisibility)
    return EnforcementStatus::DefaultVisibility;
  for (const auto &P : Patches)
    if (P.Symbol == F.Name)
      return EnforcementStatus::DefaultVisibility;
  return EnforcementStatus::Protected;
}

CoverageCore computeCoverage(const std::vector<FunctionRecord> &Functions,
                             const std::vector<IgnorelistEntry> &Entries,
                             const std::vector<VisibilityPatch> &Patches) {
  CoverageCore C;
  for (auto S : {EnforcementStatus::Protected, EnforcementStatus::DefaultVisibility,
                 EnforcementStatus::Ignored}) {
    C.FunctionCounts[S] = 0;
    C.CallSiteCounts[S] = 0;
  }
  for (const auto &F : Functions) {
    auto S = statusOf(F, Entries, Patches);
    ++C.FunctionCounts[S];
    C.CallSiteCounts[S] += F.CallSiteCount;
  }
  auto triple = [](std::map<EnforcementStatus, std::uint64_t> &M) {
    return reconcile(M[EnforcementStatus::Protected], M[EnforcementStatus::DefaultVisibility],
                     M[EnforcementStatus::Ignored]);
  };
  C.PerFunction = triple(C.FunctionCounts);
  C.PerCallSite = triple(C.CallSiteCounts);
  return C;
}

std::string formatDuration(double Seconds) {
  auto S = static_cast<long long>(std::llround(std::max(0.0, Seconds)));
  return fmt::format("{:02}:{:02}:{:02}", S / 3600, (S / 60) % 60, S % 60);
}

namespace {

std::string esc(std::string_view S) {
  std::string Out;
  for (char C : S) {
    switch (C) {
    case '&':
      Out += "&amp;";
      break;
    case '<':
      Out += "&lt;";
      break;
    case '>':
      Out += "&gt;";
      break;
    case '"':
      Out += "&quot;";
      break;
    default:
      Out += C;
    }
  }
  return Out;
}

std::string text(const nlohmann::json &J) {
  if (J.is_null())
    return "";
  if (J.is_string())
    return esc(J.get<std::string>());
  return esc(J.dump());
}

std::string pct(const nlohmann::json &J, const char *Key) {
  return formatHundredths(J.value(std::string(Key) + "_hundredths", std::int64_t{0}));
}

void row(std::string &H, std::initializer_list<std::string> Cells, const char *Tag = "td") {
  H += "<tr>";
  for (const auto &C : Cells)
    H += fmt::format("<{0}>{1}</{0}>", Tag, C);
  H += "</tr>\n";
}

} // namespace

std::string renderHtml(const nlohmann::json &R) {
  std::string H;
  H += "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>CFI report</title>\n"
       "<style>body{font-family:sans-serif}table{border-collapse:collapse;margin:1em 0}"
       "td,th{border:1px solid #999;padding:2px 8px;text-align:left}</style>\n"
       "</head><body>\n";
  H += "<h1>CFI enforcement report</h1>\n";
  H += "<table>\n";
  row(H, {"project", text(R.value("project_root", nlohmann::json()))});
  std::string Variants;
  for (const auto &V : R.value("cfi_variants", nlohmann::json::array()))
    Variants += (Variants.empty() ? "" : ", ") + text(V);
  row(H, {"variants", Variants});
  row(H, {"duration", formatDuration(R.value("duration_seconds", 0.0))});
  row(H, {"schema", text(R.value("schema_version", nlohmann::json()))});
  H += "</table>\n";

  const auto &S = R.value("summary", nlohmann::json::object());
  H += "<h2>Violations and tests</h2>\n<table>\n";
  row(H, {"violations", "fixed", "unresolvable", "functional (non-CFI)"}, "th");
  row(H, {text(S.value("violations", nlohmann::json(0))), text(S.value("fixed", nlohmann::json(0))),
          text(S.value("unresolvable", nlohmann::json(0))),
          text(S.value("functional", nlohmann::json(0)))});
  H += "</table>\n<table>\n";
  row(H, {"class", "tests"}, "th");
  const auto &T = R.value("tests", nlohmann::json::object());
  const auto Counts = T.value("counts", nlohmann::json::object());
  for (const auto &[K, V] : Counts.items())
    row(H, {esc(K), text(V)});
  row(H, {"indeterminate", text(nlohmann::json(T.value("indeterminate", nlohmann::json::array()).size()))});
  H += "</table>\n";

  const auto &C = R.value("coverage", nlohmann::json::object());
  H += "<h2>Coverage</h2>\n<table>\n";
  row(H, {"aggregation", "protected %", "default visibility %", "ignored %"}, "th");
  for (const char *Agg : {"per_function", "per_call_site"}) {
    const auto &A = C.value(Agg, nlohmann::json::object());
    row(H, {Agg, pct(A, "protected"), pct(A, "default_visibility"), pct(A, "ignored")});
  }
  H += "</table>\n";
  H += fmt::format("<p>functions: {}, indirect call sites: {}</p>\n",
                   text(C.value("functions", nlohmann::json(0))),
                   text(C.value("call_sites", nlohmann::json(0))));

  const auto &Census = R.value("census", nlohmann::json::object());
  H += "<h2>IR census</h2>\n<table>\n";
  row(H, {"category", "sites"}, "th");
  for (const char *K : {"fp_calls", "virtual_calls", "callback_stores", "jt_switch", "jt_lowered",
                        "inline_asm", "total_sites", "diagnostics"})
    row(H, {K, text(Census.value(K, nlohmann::json(0)))});
  H += "</table>\n";

  H += "<h2>Violations by translation unit</h2>\n";
  std::map<std::string, std::vector<nlohmann::json>> ByFile;
  for (const auto &V : R.value("violations", nlohmann::json::array())) {
    std::string File = V.value("callee", nlohmann::json::object()).value("file", "");
    ByFile[File.empty() ? "(unknown)" : File].push_back(V);
  }
  H += "<table>\n";
  row(H, {"file", "violations", "violation", "function", "status", "level", "tests"}, "th");
  for (const auto &[File, Vs] : ByFile) {
    bool First = true;
    for (const auto &V : Vs) {
      std::string Tests;
      for (const auto &Id : V.value("tests", nlohmann::json::array()))
        Tests += (Tests.empty() ? "" : ", ") + text(Id);
      row(H, {First ? esc(File) : "", First ? std::to_string(Vs.size()) : "", text(V["id"]),
              text(V.value("callee", nlohmann::json::object()).value("function", nlohmann::json())),
              text(V["status"]), text(V.value("level", nlohmann::json())), Tests});
      First = false;
    }
  }
  H += "</table>\n";

  const auto &L = R.value("ledger", nlohmann::json::object());
  H += "<h2>Visibility repair ledger</h2>\n<table>\n";
  row(H, {"build-phase iterations", text(L.value("iterations_build_phase", nlohmann::json(0)))});
  row(H, {"test-phase iterations", text(L.value("iterations_test_phase", nlohmann::json(0)))});
  row(H, {"builds run", text(L.value("builds_run", nlohmann::json(0)))});
  H += "</table>\n<table>\n";
  row(H, {"iteration", "symbol", "file", "line"}, "th");
  for (const auto &P : L.value("patches", nlohmann::json::array()))
    row(H, {text(P["iteration"]), text(P["symbol"]), text(P["file"]), text(P["line"])});
  H += "</table>\n";

  H += "<h2>Ignorelist</h2>\n<pre>";
  for (const auto &E : R.value("ignorelist", nlohmann::json::array()))
    H += text(E) + "\n";
  H += "</pre>\n</body></html>\n";
  return H;
}

std::vector<fs::path> emitReport(const nlohmann::json &Report, const fs::path &Dir,
                                 const std::set<ReportFormat> &Formats) {
  std::error_code EC;
  fs::create_directories(Dir, EC);
  if (EC || !fs::is_directory(Dir))
    throw EmissionError("cannot create report directory " + Dir.string());
  std::vector<fs::path> Written;
  auto write = [&](const fs::path &P, const std::string &Body) {
    std::ofstream Out(P, std::ios::binary | std::ios::trunc);
    if (!Out || !(Out << Body) || !Out.flush())
      throw EmissionError("cannot write " + P.string());
    Written.push_back(P);
  };
  if (Formats.count(ReportFormat::Json))
    write(Dir / "report.json", Report.dump(2) + "\n");
  if (Formats.count(ReportFormat::Html))
    write(Dir / "report.html", renderHtml(Report));
  return Written;
}

} // namespace cfimend
