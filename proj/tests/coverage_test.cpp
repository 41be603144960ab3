#include "cfimend/coverage.hpp"
#include "cfimend/error.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace cfimend;
using namespace cfimend::testing;

namespace {

IgnorelistEntry entry(IgnorelistEntry::Kind K, std::string P) {
  return {K, std::move(P), {"v"}, K == IgnorelistEntry::Kind::Fun ? LadderLevel::L0 : LadderLevel::L3,
          true};
}

VisibilityPatch patch(std::string Sym) {
  VisibilityPatch P;
  P.Symbol = std::move(Sym);
  return P;
}

struct Table {
  std::vector<FunctionRecord> Functions;
  std::vector<IgnorelistEntry> Entries;
  std::vector<VisibilityPatch> Patches;
};

// util-linux-shaped table: 10000 functions split 8629 / 1054 / 317 and
// 28242 indirect call sites split 25265 / 2127 / 850. Ignored functions are
// reached through both src: and fun: entries, default-visibility ones through
// both patches and exported definitions.
Table utilLinuxShaped() {
  Table T;
  auto spread = [](std::uint64_t Sites, std::size_t N, std::size_t I) {
    return Sites / N + (I < Sites % N ? 1 : 0);
  };
  for (std::size_t I = 0; I < 8629; ++I)
    T.Functions.push_back({"p" + std::to_string(I), "src/p" + std::to_string(I % 40) + ".c",
                           spread(25265, 8629, I), false});
  for (std::size_t I = 0; I < 1054; ++I) {
    bool Patched = I % 2 == 0;
    std::string Name = "d" + std::to_string(I);
    T.Functions.push_back({Name, "lib/d.c", spread(2127, 1054, I), !Patched});
    if (Patched)
      T.Patches.push_back(patch(Name));
  }
  for (std::size_t I = 0; I < 317; ++I) {
    bool ByFile = I < 300;
    std::string Name = "i" + std::to_string(I);
    std::string File = ByFile ? "libsmartcols/src/filter-param" + std::to_string(I % 3) + ".c"
                              : "libfdisk/src/ask.c";
    // A few ignored functions are also patched or exported: Ignored wins.
    T.Functions.push_back({Name, File, spread(850, 317, I), I % 50 == 0});
    if (!ByFile)
      T.Entries.push_back(entry(IgnorelistEntry::Kind::Fun, Name));
    if (I % 25 == 1)
      T.Patches.push_back(patch(Name));
  }
  for (int F = 0; F < 3; ++F)
    T.Entries.push_back(entry(IgnorelistEntry::Kind::Src,
                              "libsmartcols/src/filter-param" + std::to_string(F) + ".c"));
  return T;
}

} // namespace

TEST(Coverage, HalfEvenRounding) {
  EXPECT_EQ(hundredthsHalfEven(1, 800), 12);  // 12.5
  EXPECT_EQ(hundredthsHalfEven(3, 800), 38);  // 37.5
  EXPECT_EQ(hundredthsHalfEven(1, 3), 3333);
  EXPECT_EQ(hundredthsHalfEven(2, 3), 6667);
  EXPECT_EQ(hundredthsHalfEven(5, 5), 10000);
  EXPECT_EQ(hundredthsHalfEven(1, 0), 0);
}

TEST(Coverage, ReconcileLargestAbsorbs) {
  EXPECT_EQ(reconcile(1, 1, 1), (CoverageTriple{3334, 3333, 3333}));
  EXPECT_EQ(reconcile(0, 0, 0), (CoverageTriple{10000, 0, 0}));
  EXPECT_EQ(reconcile(2, 2, 2).sum(), 10000);
}

TEST(CoverageProperty, ReconciledTriplesSumToHundred) {
  std::uniform_int_distribution<std::uint64_t> N(0, 100000);
  for (int I = 0; I < 20000; ++I) {
    std::uint64_t P = N(rng()), D = N(rng()), G = N(rng());
    auto T = reconcile(P, D, G);
    ASSERT_EQ(T.sum(), 10000);
    if (P + D + G == 0)
      continue;
    double Total = static_cast<double>(P + D + G);
    ASSERT_LE(std::abs(T.Protected - 10000.0 * P / Total), 1.5);
    ASSERT_LE(std::abs(T.Default - 10000.0 * D / Total), 1.5);
    ASSERT_LE(std::abs(T.Ignored - 10000.0 * G / Total), 1.5);
  }
}

TEST(Coverage, Figure4UtilLinux) {
  auto T = utilLinuxShaped();
  auto C = computeCoverage(T.Functions, T.Entries, T.Patches);
  EXPECT_EQ(C.FunctionCounts[EnforcementStatus::Protected], 8629u);
  EXPECT_EQ(C.FunctionCounts[EnforcementStatus::DefaultVisibility], 1054u);
  EXPECT_EQ(C.FunctionCounts[EnforcementStatus::Ignored], 317u);
  EXPECT_EQ(C.PerFunction, (CoverageTriple{8629, 1054, 317}));
  EXPECT_EQ(C.PerCallSite, (CoverageTriple{8946, 753, 301}));
  EXPECT_EQ(formatHundredths(C.PerCallSite.Protected), "89.46");
  EXPECT_EQ(formatHundredths(C.PerFunction.Ignored), "3.17");
}

TEST(Coverage, EmptyInputsAreFullyProtected) {
  std::vector<FunctionRecord> Fs = {{"a", "a.c", 3, false}, {"b", "b.c", 0, false}};
  auto C = computeCoverage(Fs, {}, {});
  EXPECT_EQ(C.PerFunction, (CoverageTriple{10000, 0, 0}));
  EXPECT_EQ(C.PerCallSite, (CoverageTriple{10000, 0, 0}));
}

TEST(Coverage, StatusPrecedence) {
  FunctionRecord F{"f", "lib/./x.c", 2, true};
  auto Fun = entry(IgnorelistEntry::Kind::Fun, "f");
  auto Src = entry(IgnorelistEntry::Kind::Src, "lib/x.c");
  EXPECT_EQ(statusOf(F, {Fun}, {patch("f")}), EnforcementStatus::Ignored);
  EXPECT_EQ(statusOf(F, {Src}, {}), EnforcementStatus::Ignored);
  EXPECT_EQ(statusOf(F, {}, {}), EnforcementStatus::DefaultVisibility);
  F.DefaultVisibility = false;
  EXPECT_EQ(statusOf(F, {}, {patch("f")}), EnforcementStatus::DefaultVisibility);
  EXPECT_EQ(statusOf(F, {}, {}), EnforcementStatus::Protected);
  Fun.Active = false;
  EXPECT_EQ(statusOf(F, {Fun}, {}), EnforcementStatus::Protected);
}

TEST(Coverage, ZeroSiteFunctionsOnlyWeighPerFunction) {
  std::vector<FunctionRecord> Fs = {{"a", "a.c", 4, false}, {"b", "b.c", 0, false}};
  auto C = computeCoverage(Fs, {entry(IgnorelistEntry::Kind::Fun, "b")}, {});
  EXPECT_EQ(C.PerFunction, (CoverageTriple{5000, 0, 5000}));
  EXPECT_EQ(C.PerCallSite, (CoverageTriple{10000, 0, 0}));
}

TEST(Coverage, Duration) {
  EXPECT_EQ(formatDuration(0), "00:00:00");
  EXPECT_EQ(formatDuration(3725.4), "01:02:05");
  EXPECT_EQ(formatDuration(100 * 3600), "100:00:00");
}

TEST(Report, HtmlIsPureProjection) {
  nlohmann::json R = {
      {"schema_version", 1},
      {"project_root", "/p"},
      {"cfi_variants", {"cfi-icall"}},
      {"duration_seconds", 3725},
      {"summary", {{"violations", 2}, {"fixed", 1}, {"unresolvable", 1}, {"functional", 0}}},
      {"violations",
       {{{"id", "v-a"}, {"status", "Fixed"}, {"level", "L3"}, {"tests", {"t1", "t2"}},
         {"callee", {{"file", "libfdisk/src/ask.c"}, {"function", "ask_cb"}}}},
        {{"id", "v-b"}, {"status", "Unresolvable"}, {"level", "L5"}, {"tests", {"t3"}},
         {"callee", {{"file", "libfdisk/src/ask.c"}, {"function", "<x>"}}}}}},
      {"ignorelist", {"src:libfdisk/src/ask.c"}}};
  auto H = renderHtml(R);
  EXPECT_EQ(renderHtml(nlohmann::json::parse(R.dump())), H);
  EXPECT_NE(H.find("01:02:05"), std::string::npos);
  EXPECT_NE(H.find("<td>libfdisk/src/ask.c</td><td>2</td>"), std::string::npos);
  EXPECT_NE(H.find("&lt;x&gt;"), std::string::npos);
  EXPECT_EQ(H.find("<x>"), std::string::npos);
}

TEST(Report, EmitWritesBothFormats) {
  TempDir T;
  nlohmann::json R = {{"schema_version", 1}};
  auto Files = emitReport(R, T.path() / "out");
  ASSERT_EQ(Files.size(), 2u);
  EXPECT_EQ(nlohmann::json::parse(readFile(T.path() / "out" / "report.json")), R);
  EXPECT_EQ(readFile(T.path() / "out" / "report.html"), renderHtml(R));
  EXPECT_EQ(emitReport(R, T.path() / "j", {ReportFormat::Json}).size(), 1u);
}

TEST(Report, UnwritableDirectory) {
  TempDir T;
  writeFile(T.path() / "file", "x");
  EXPECT_THROW(emitReport({}, T.path() / "file" / "sub"), EmissionError);
}
