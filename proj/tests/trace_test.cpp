#include "cfimend/elf.hpp"
#include "cfimend/process.hpp"
#include "cfimend/trace.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <csignal>
#include <map>

using namespace cfimend;
using namespace cfimend::testing;

namespace {

MemoryReader reader(const std::map<Address, std::uint64_t> &Mem) {
  return [Mem](Address A) -> std::optional<std::uint64_t> {
    auto It = Mem.find(A);
    if (It == Mem.end())
      return std::nullopt;
    return It->second;
  };
}

Registers withFp(Address Fp) {
  Registers R;
  R.Rbp = Fp;
  R.Rsp = Fp - 64;
  return R;
}

class TrapFixture : public ::testing::Test {
protected:
  static void SetUpTestSuite() {
    Dir = new TempDir;
    Bin = buildTrapFixture(Dir->path());
  }
  static void TearDownTestSuite() { delete Dir; }

  static TraceOutcome run(const std::string &Args, int TimeoutMs = 10000) {
    TracedCommand C;
    C.Script = Bin.Binary.string() + " " + Args;
    C.WorkingDir = Dir->path();
    C.Timeout = std::chrono::milliseconds(TimeoutMs);
    return runTraced(C);
  }

  static TempDir *Dir;
  static TrapBinary Bin;
};

TempDir *TrapFixture::Dir = nullptr;
TrapBinary TrapFixture::Bin;

} // namespace

TEST(CorrectPc, Examples) {
  EXPECT_EQ(correctPc(TrapSignal::IllegalInstruction, 0x401234), 0x401234u);
  EXPECT_EQ(correctPc(TrapSignal::BreakpointTrap, 0x401235), 0x401234u);
  EXPECT_EQ(correctPc(TrapSignal::IllegalInstruction, 0), 0u);
  static_assert(correctPc(TrapSignal::BreakpointTrap, 1) == 0);
}

TEST(CorrectPc, PropertyOverSampledAddresses) {
  std::uniform_int_distribution<Address> Any(1, ~Address{0});
  for (int I = 0; I < 100000; ++I) {
    Address X = Any(rng());
    ASSERT_EQ(correctPc(TrapSignal::IllegalInstruction, X), X);
    ASSERT_EQ(correctPc(TrapSignal::BreakpointTrap, X), X - 1);
  }
}

TEST(Unwind, TwoFrames) {
  const Address Fp0 = 0x7ffc1000, Fp1 = 0x7ffc1040, A = 0x401111, B = 0x402222;
  auto R = unwindFrames(withFp(Fp0), reader({{Fp0 + 8, A}, {Fp0, Fp1}, {Fp1 + 8, B}}));
  EXPECT_EQ(R, (std::vector<Address>{A, B}));
}

TEST(Unwind, NonMonotonicTruncates) {
  const Address Fp0 = 0x7ffc1000, A = 0x401111, B = 0x402222;
  for (Address Fp1 : {Fp0, Fp0 - 0x40}) {
    auto R = unwindFrames(withFp(Fp0), reader({{Fp0 + 8, A}, {Fp0, Fp1}, {Fp1 + 8, B}}));
    EXPECT_EQ(R, (std::vector<Address>{A}));
  }
}

TEST(Unwind, UnreadableFirstSlot) {
  const Address Fp0 = 0x7ffc1000;
  EXPECT_TRUE(unwindFrames(withFp(Fp0), reader({{Fp0, Fp0 + 0x40}})).empty());
}

// Synthetic stacks whose expected chain follows from how they were built.
TEST(Unwind, PropertyRandomStacks) {
  std::uniform_int_distribution<Address> Base(0x1000, 0x7fff'ffff'0000);
  std::uniform_int_distribution<Address> Step(1, 0x10000);
  std::uniform_int_distribution<int> Choice(0, 5);
  for (int I = 0; I < 20000; ++I) {
    Address Fp0 = Base(rng()) & ~Address{7};
    Address A = Base(rng()), B = Base(rng()), C = Base(rng());
    int Shape = Choice(rng());
    bool HaveRet0 = Shape != 0;
    bool HaveFp1 = Shape != 1;
    bool Monotonic = Shape != 2;
    bool HaveRet1 = Shape != 3;
    Address Fp1 = Monotonic ? Fp0 + Step(rng()) * 8 : Fp0 - Step(rng()) * 8 * (Shape % 2);
    std::map<Address, std::uint64_t> Mem;
    if (HaveRet0)
      Mem[Fp0 + 8] = A;
    if (HaveFp1)
      Mem[Fp0] = Fp1;
    if (HaveRet1 && Fp1 + 8 != Fp0 && Fp1 + 8 != Fp0 + 8)
      Mem[Fp1 + 8] = B;
    // A third frame must never be followed.
    Address Fp2 = Fp1 + 0x100;
    Mem.emplace(Fp1, Fp2);
    Mem.emplace(Fp2 + 8, C);

    std::vector<Address> Expected;
    if (HaveRet0) {
      Expected.push_back(A);
      if (HaveFp1 && Monotonic && Mem.count(Fp1 + 8))
        Expected.push_back(Mem[Fp1 + 8]);
    }
    auto Got = unwindFrames(withFp(Fp0), reader(Mem));
    ASSERT_EQ(Got, Expected) << "shape " << Shape;
    ASSERT_LE(Got.size(), 2u);
  }
}

TEST(ProcMaps, Parse) {
  auto M = parseProcMaps(
      "55d0c0a00000-55d0c0a01000 r--p 00000000 08:01 1234 /usr/bin/app\n"
      "55d0c0a01000-55d0c0a02000 r-xp 00001000 08:01 1234 /usr/bin/app\n"
      "7ffd1000-7ffd2000 rw-p 00000000 00:00 0 [stack]\n"
      "7ffd3000-7ffd4000 rw-p 00000000 00:00 0\n");
  ASSERT_EQ(M.size(), 4u);
  EXPECT_EQ(M[1].Start, 0x55d0c0a01000u);
  EXPECT_EQ(M[1].FileOffset, 0x1000u);
  EXPECT_EQ(M[1].Perms, "r-xp");
  EXPECT_EQ(M[1].Path, "/usr/bin/app");
  EXPECT_EQ(M[2].Path, "[stack]");
  EXPECT_EQ(M[3].Path, "");
  EXPECT_TRUE(M[1].contains(0x55d0c0a01fffu));
  EXPECT_FALSE(M[1].contains(0x55d0c0a02000u));
}

TEST_F(TrapFixture, Ud2FaultPcMatchesLinkerMap) {
  auto Site = mapSymbolAddress(Bin.Map, "ud2_site");
  ASSERT_TRUE(Site);
  auto O = run("ud2");
  ASSERT_EQ(O.OutcomeKind, TraceOutcome::Kind::Trapped) << describe(O);
  ASSERT_TRUE(O.Trap);
  EXPECT_EQ(O.Trap->Signal, TrapSignal::IllegalInstruction);
  EXPECT_EQ(O.Trap->FaultPc, *Site);
  EXPECT_EQ(O.Trap->RawPc, *Site);
  EXPECT_TRUE(O.trappedCfi());
  EXPECT_EQ(fs::path(O.Trap->Binary).filename(), "traps");
}

TEST_F(TrapFixture, Int3IsCorrectedByOne) {
  auto Site = mapSymbolAddress(Bin.Map, "int3_site");
  ASSERT_TRUE(Site);
  auto O = run("int3");
  ASSERT_EQ(O.OutcomeKind, TraceOutcome::Kind::Trapped) << describe(O);
  EXPECT_EQ(O.Trap->Signal, TrapSignal::BreakpointTrap);
  EXPECT_EQ(O.Trap->FaultPc, *Site);
  EXPECT_EQ(O.Trap->RawPc, *Site + 1);
  EXPECT_FALSE(O.trappedCfi());
}

TEST_F(TrapFixture, ReturnAddressLandsInMain) {
  std::string Err;
  auto Img = ElfImage::load(Bin.Binary, Err);
  ASSERT_TRUE(Img) << Err;
  std::optional<ElfSymbol> Main;
  for (const auto &S : Img->functionSymbols())
    if (S.Name == "main")
      Main = S;
  ASSERT_TRUE(Main);
  auto O = run("ud2");
  ASSERT_TRUE(O.Trap);
  ASSERT_GE(O.Trap->ReturnAddresses.size(), 1u);
  ASSERT_LE(O.Trap->ReturnAddresses.size(), 2u);
  Address Ret0 = O.Trap->ReturnAddresses[0];
  EXPECT_GE(Ret0 - 1, Main->Value);
  EXPECT_LT(Ret0 - 1, Main->Value + Main->Size);
}

TEST_F(TrapFixture, PlainExits) {
  auto O = run("");
  EXPECT_EQ(O.OutcomeKind, TraceOutcome::Kind::Exited);
  EXPECT_EQ(O.ExitStatus, 0);
  EXPECT_TRUE(O.passed());
  auto F = run("fail");
  EXPECT_EQ(F.OutcomeKind, TraceOutcome::Kind::Exited);
  EXPECT_EQ(F.ExitStatus, 3);
}

TEST_F(TrapFixture, OtherSignal) {
  TracedCommand C;
  C.Script = "exec " + Bin.Binary.string() + " abort";
  C.WorkingDir = Dir->path();
  C.Timeout = std::chrono::milliseconds(10000);
  auto O = runTraced(C);
  EXPECT_EQ(O.OutcomeKind, TraceOutcome::Kind::Signalled) << describe(O);
  EXPECT_EQ(O.Signal, SIGABRT);
  // Without exec the shell survives the child and reports 128 + signal.
  auto Wrapped = run("abort");
  EXPECT_FALSE(Wrapped.passed());
  if (Wrapped.OutcomeKind == TraceOutcome::Kind::Exited)
    EXPECT_EQ(Wrapped.ExitStatus, 128 + SIGABRT);
}

TEST_F(TrapFixture, TimeoutKillsTree) {
  auto O = run("spin", 500);
  EXPECT_EQ(O.OutcomeKind, TraceOutcome::Kind::TimedOut) << describe(O);
  EXPECT_LT(O.WallSeconds, 5.0);
}

TEST_F(TrapFixture, TrapInGrandchildIsCaught) {
  TracedCommand C;
  C.Script = "sh -c '" + Bin.Binary.string() + " ud2; echo after'";
  C.WorkingDir = Dir->path();
  auto O = runTraced(C);
  ASSERT_EQ(O.OutcomeKind, TraceOutcome::Kind::Trapped) << describe(O);
  EXPECT_EQ(O.Trap->FaultPc, *mapSymbolAddress(Bin.Map, "ud2_site"));
}

TEST(Traced, StdoutDigest) {
  TracedCommand C;
  C.Script = "printf 'hi\\n'; printf 'oops' >&2";
  C.WorkingDir = fs::temp_directory_path();
  auto O = runTraced(C);
  EXPECT_TRUE(O.passed());
  EXPECT_EQ(O.StdoutDigest, sha256Hex("hi\n"));
  EXPECT_EQ(O.StderrDigest, sha256Hex("oops"));
}

TEST(Sha256, KnownVector) {
  EXPECT_EQ(sha256Hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
