#include "cfimend/build.hpp"
#include "cfimend/error.hpp"
#include "cfimend/ignorelist.hpp"
#include "cfimend/process.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace cfimend;
using namespace cfimend::testing;

namespace {

using Kind = Diagnostic::Kind;

std::vector<Diagnostic> symbolic(const std::vector<Diagnostic> &Ds) {
  std::vector<Diagnostic> Out;
  std::copy_if(Ds.begin(), Ds.end(), std::back_inserter(Out),
               [](const auto &D) { return D.DiagKind != Kind::Other; });
  return Out;
}

// Links a program against a library whose only function is hidden, with the
// given linker, and returns what the toolchain printed.
std::string realLinkerLog(const fs::path &Dir, const std::string &Linker, bool HiddenDecl) {
  writeFile(Dir / "lib.c", "int shared_fn(void) { return 1; }\n");
  writeFile(Dir / "app.c", std::string(HiddenDecl ? "extern __attribute__((visibility(\"hidden\")))"
                                                  : "") +
                               " int shared_fn(void);\nint main(void) { return shared_fn(); }\n");
  ShellCommand C;
  C.WorkingDir = Dir;
  C.Script = "clang -fPIC -fvisibility=hidden -shared lib.c -o libx.so && "
             "clang -fPIC -fuse-ld=" +
             Linker + " app.c -L. -lx -o app";
  auto R = runShell(C);
  EXPECT_NE(R.ExitCode, 0) << R.Output;
  return R.Output;
}

} // namespace

TEST(ComposeFlags, Baseline) {
  EXPECT_TRUE(composeFlags(BuildMode::baseline()).empty());
  EXPECT_EQ(composeFlags(BuildMode::baseline(), {"-g", "-O1"}),
            (std::vector<std::string>{"-g", "-O1"}));
}

TEST(ComposeFlags, SingleVariant) {
  auto F = composeFlags(BuildMode::cfi({CfiVariant::ICall}, "P"));
  EXPECT_EQ(F, (std::vector<std::string>{"-flto", "-fvisibility=hidden", "-fsanitize=cfi-icall",
                                         "-fsanitize-ignorelist=P", "-fno-omit-frame-pointer"}));
}

TEST(ComposeFlags, AllSevenVariantsOnce) {
  std::vector<CfiVariant> All(AllCfiVariants.begin(), AllCfiVariants.end());
  auto F = composeFlags(BuildMode::cfi(All, "P"));
  auto It = std::find_if(F.begin(), F.end(),
                         [](const auto &S) { return S.rfind("-fsanitize=", 0) == 0; });
  ASSERT_NE(It, F.end());
  std::string Value = It->substr(std::string("-fsanitize=").size()) + ",";
  for (const char *Name : {"cfi-icall", "cfi-vcall", "cfi-nvcall", "cfi-mfcall", "cfi-cast-strict",
                           "cfi-derived-cast", "cfi-unrelated-cast"}) {
    std::string Token = std::string(Name) + ",";
    auto First = Value.find(Token);
    ASSERT_NE(First, std::string::npos) << Name;
    // "cfi-derived-cast," is not a suffix match of another name; check it occurs once.
    auto Count = 0;
    for (std::size_t P = 0; (P = Value.find(Token, P)) != std::string::npos; ++P)
      if (P == 0 || Value[P - 1] == ',')
        ++Count;
    EXPECT_EQ(Count, 1) << Name;
  }
}

TEST(ComposeFlags, ModesDifferOnlyByCfiFlags) {
  std::vector<std::string> Extra = {"-g", "-gdwarf-4", "-O2"};
  auto B = composeFlags(BuildMode::baseline(), Extra);
  auto C = composeFlags(BuildMode::cfi({CfiVariant::ICall, CfiVariant::VCall}, "/l"), Extra);
  ASSERT_EQ(C.size(), B.size() + 5);
  EXPECT_TRUE(std::equal(B.begin(), B.end(), C.end() - B.size()));
  EXPECT_EQ(C, composeFlags(BuildMode::cfi({CfiVariant::ICall, CfiVariant::VCall}, "/l"), Extra));
}

TEST(ComposeFlags, CfiWithoutIgnorelistIsContractViolation) {
  BuildMode M;
  M.ModeKind = BuildMode::Kind::Cfi;
  M.Variants = {CfiVariant::ICall};
  EXPECT_THROW(composeFlags(M), ContractViolation);
  EXPECT_THROW(composeFlags(BuildMode::cfi({}, "P")), ContractViolation);
}

TEST(ParseDiagnostics, EmptyAndDuplicates) {
  EXPECT_TRUE(parseDiagnostics("").empty());
  std::string Line = "/usr/bin/ld: app.o: in function `main': app.c:(.text+0x10): undefined "
                     "reference to `foo'\n";
  auto D = parseDiagnostics(Line + Line);
  ASSERT_EQ(D.size(), 2u);
  EXPECT_EQ(D[0].DiagKind, Kind::UndefinedReference);
  EXPECT_EQ(D[0].Symbol, "foo");
  EXPECT_EQ(D[0], D[1]);
}

TEST(ParseDiagnostics, MangledNamesVerbatim) {
  auto D = parseDiagnostics("ld.lld: error: undefined symbol: _ZN3foo3barEv\n");
  ASSERT_EQ(D.size(), 1u);
  EXPECT_EQ(D[0].Symbol, "_ZN3foo3barEv");
  auto H = parseDiagnostics("ld.lld: error: non-exported symbol '_Z1fv' in 'a.o' is referenced "
                            "by DSO 'libb.so'\n");
  ASSERT_EQ(H.size(), 1u);
  EXPECT_EQ(H[0].DiagKind, Kind::HiddenSymbolMismatch);
  EXPECT_EQ(H[0].Symbol, "_Z1fv");
  EXPECT_EQ(H[0].SourceObject, "a.o");
}

TEST(ParseDiagnostics, LiveLld) {
  TempDir T;
  auto Plain = symbolic(parseDiagnostics(realLinkerLog(T.path(), "lld", false)));
  ASSERT_EQ(Plain.size(), 1u);
  EXPECT_EQ(Plain[0].DiagKind, Kind::UndefinedReference);
  EXPECT_EQ(Plain[0].Symbol, "shared_fn");
  auto Hidden = symbolic(parseDiagnostics(realLinkerLog(T.path(), "lld", true)));
  ASSERT_EQ(Hidden.size(), 1u);
  EXPECT_EQ(Hidden[0].DiagKind, Kind::HiddenSymbolMismatch);
  EXPECT_EQ(Hidden[0].Symbol, "shared_fn");
}

TEST(ParseDiagnostics, LiveGnuLd) {
  TempDir T;
  auto Plain = symbolic(parseDiagnostics(realLinkerLog(T.path(), "bfd", false)));
  ASSERT_EQ(Plain.size(), 1u);
  EXPECT_EQ(Plain[0].DiagKind, Kind::UndefinedReference);
  EXPECT_EQ(Plain[0].Symbol, "shared_fn");
  auto Hidden = symbolic(parseDiagnostics(realLinkerLog(T.path(), "bfd", true)));
  ASSERT_EQ(Hidden.size(), 2u);
  EXPECT_EQ(Hidden[0].DiagKind, Kind::UndefinedReference);
  EXPECT_EQ(Hidden[1].DiagKind, Kind::HiddenSymbolMismatch);
  for (const auto &D : Hidden)
    EXPECT_EQ(D.Symbol, "shared_fn");
}

TEST(ParseDiagnostics, LiveGold) {
  TempDir T;
  auto Plain = symbolic(parseDiagnostics(realLinkerLog(T.path(), "gold", false)));
  ASSERT_EQ(Plain.size(), 1u);
  EXPECT_EQ(Plain[0].DiagKind, Kind::UndefinedReference);
  EXPECT_EQ(Plain[0].Symbol, "shared_fn");
}

TEST(ParseDiagnostics, ReparseIsStable) {
  TempDir T;
  for (const char *L : {"lld", "bfd", "gold"}) {
    auto Log = realLinkerLog(T.path(), L, true);
    auto D = parseDiagnostics(Log);
    EXPECT_EQ(parseDiagnostics(Log), D);
    std::string Rejoined;
    for (const auto &X : D)
      Rejoined += X.Message + "\n";
    EXPECT_EQ(parseDiagnostics(Rejoined), D) << L;
  }
}

TEST(RunBuild, BaselineAndHiddenCrossLibraryFailure) {
  TempDir T;
  auto Dir = copyProject("visibility_chain", T.path());
  auto Cfg = projectConfig(Dir);
  auto B = runBuild(Cfg, BuildMode::baseline(), {1, true});
  EXPECT_TRUE(B.Succeeded) << B.RawLog;
  EXPECT_TRUE(symbolic(B.Diagnostics).empty());
  ASSERT_EQ(B.ProducedExecutables.size(), 1u);
  EXPECT_TRUE(fs::exists(B.LogFile));
  EXPECT_EQ(B.LogFile.filename(), "build-baseline-1.log");

  writeIgnorelist(Cfg.ReportDir, {});
  auto C = runBuild(Cfg, BuildMode::cfi(Cfg.CfiVariants, ignorelistPath(Cfg.ReportDir)), {2, true});
  EXPECT_FALSE(C.Succeeded);
  auto S = symbolic(C.Diagnostics);
  ASSERT_EQ(S.size(), 1u) << C.RawLog;
  EXPECT_EQ(S[0].DiagKind, Kind::UndefinedReference);
  EXPECT_EQ(S[0].Symbol, "b_value");
  EXPECT_EQ(parseDiagnostics(C.RawLog), C.Diagnostics);
  EXPECT_EQ(readFile(C.LogFile), C.RawLog);
}

TEST(RunShell, OutputCapMarksTruncation) {
  ShellCommand C;
  C.Script = "head -c 10000 /dev/zero | tr '\\0' x";
  C.WorkingDir = fs::temp_directory_path();
  C.OutputCap = 100;
  auto R = runShell(C);
  EXPECT_TRUE(R.Truncated);
  EXPECT_EQ(R.Output, std::string(100, 'x') + truncationMarker(100));
}

TEST(RunShell, Quoting) {
  EXPECT_EQ(shellQuote("it's"), "'it'\\''s'");
  ShellCommand C;
  C.Script = "printf '%s|' " + shellJoin({"a b", "c'd", "$HOME"});
  C.WorkingDir = fs::temp_directory_path();
  EXPECT_EQ(runShell(C).Output, "a b|c'd|$HOME|");
}
