#include "cfimend/error.hpp"
#include "cfimend/escalation.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace cfimend;
using namespace cfimend::testing;
using Status = Violation::Status;

namespace {

const fs::path Root = "/work/util-linux";

ResolvedFrame frame(std::optional<std::string> Fn, std::optional<std::string> File,
                    Confidence C = Confidence::Debuginfo, bool InProject = true) {
  ResolvedFrame F;
  F.Runtime = 0x401000;
  F.Static = StaticAddress{Root / "fdisk", 0x1000};
  F.InProject = InProject;
  SymbolInfo I;
  I.Function = std::move(Fn);
  if (File)
    I.SourceFile = Root / *File;
  I.Conf = C;
  F.Info = I;
  return F;
}

Violation violation(ResolvedFrame Callee, std::optional<ResolvedFrame> Caller,
                    std::optional<ResolvedFrame> CallersCaller) {
  Violation V;
  V.Id = "v-1";
  V.TestIds = {"t"};
  V.Image = (Root / "fdisk").string();
  V.StaticFaultPc = 0x1000;
  V.Callee = std::move(Callee);
  V.Caller = std::move(Caller);
  V.CallersCaller = std::move(CallersCaller);
  deriveRungs(V, Root);
  return V;
}

Violation fullLadder() {
  return violation(frame("ask_callback", "libfdisk/src/ask.c"),
                   frame("fdisk_do_ask", "libfdisk/src/ask.c"),
                   frame("main", "disk-utils/fdisk.c"));
}

// Drives one violation the way the pipeline does; Suppresses decides, per
// entry line, whether the trap is gone with that entry active.
template <typename Pred>
std::vector<IgnorelistEntry> drive(Violation &V, Pred Suppresses,
                                   std::vector<LadderLevel> *Levels = nullptr) {
  std::vector<IgnorelistEntry> Entries;
  while (V.State == Status::Open) {
    auto E = nextScope(V);
    if (!E)
      break;
    if (Levels)
      Levels->push_back(V.Level);
    Entries = mergeEntry(Entries, *E);
    if (auto Retired = recordOutcome(V, !Suppresses(E->line())))
      retireOrigin(Entries, *Retired, V.Id);
  }
  return Entries;
}

std::vector<std::string> active(const std::vector<IgnorelistEntry> &Es) {
  std::vector<std::string> Out;
  for (const auto &E : Es)
    if (E.Active)
      Out.push_back(E.line());
  return Out;
}

} // namespace

TEST(Escalation, L0IsCalleeFunction) {
  auto V = fullLadder();
  auto E = nextScope(V);
  ASSERT_TRUE(E);
  EXPECT_EQ(E->line(), "fun:ask_callback");
  EXPECT_EQ(E->Level, LadderLevel::L0);
  EXPECT_EQ(E->Origins, (std::vector<std::string>{"v-1"}));
}

TEST(Escalation, L3IsCalleeSourceFile) {
  auto V = fullLadder();
  V.Level = LadderLevel::L3;
  auto E = nextScope(V);
  ASSERT_TRUE(E);
  EXPECT_EQ(E->line(), "src:libfdisk/src/ask.c");
}

TEST(Escalation, L5IsUnresolvable) {
  auto V = fullLadder();
  V.Level = LadderLevel::L5;
  EXPECT_FALSE(nextScope(V));
  EXPECT_EQ(V.State, Status::Unresolvable);
}

TEST(Escalation, CleanRerunFixesAtL0) {
  auto V = fullLadder();
  auto Entries = drive(V, [](const std::string &) { return true; });
  EXPECT_EQ(V.State, Status::Fixed);
  EXPECT_EQ(V.Level, LadderLevel::L0);
  EXPECT_EQ(active(Entries), (std::vector<std::string>{"fun:ask_callback"}));
}

TEST(Escalation, RecurrenceAdvancesAndRetires) {
  auto V = fullLadder();
  std::vector<IgnorelistEntry> Entries;
  auto E = nextScope(V);
  Entries = mergeEntry(Entries, *E);
  auto Retired = recordOutcome(V, true);
  ASSERT_TRUE(Retired);
  EXPECT_EQ(Retired->line(), "fun:ask_callback");
  EXPECT_TRUE(retireOrigin(Entries, *Retired, V.Id));
  EXPECT_EQ(V.Level, LadderLevel::L1);
  EXPECT_EQ(V.State, Status::Open);
  EXPECT_TRUE(active(Entries).empty());
}

TEST(Escalation, AllFailEndsUnresolvableWithNoEntries) {
  auto V = fullLadder();
  std::vector<LadderLevel> Levels;
  auto Entries = drive(V, [](const std::string &) { return false; }, &Levels);
  EXPECT_EQ(V.State, Status::Unresolvable);
  EXPECT_TRUE(active(Entries).empty());
  // L4 would repeat the L3 file (caller in the same file) and is skipped.
  EXPECT_EQ(Levels, (std::vector<LadderLevel>{LadderLevel::L0, LadderLevel::L1, LadderLevel::L2,
                                              LadderLevel::L3}));
  EXPECT_LE(V.Attempts, 5);
}

TEST(Escalation, MissingCallerSkipsL1L2L4) {
  auto V = violation(frame("cb", "a.c"), std::nullopt, std::nullopt);
  std::vector<LadderLevel> Levels;
  drive(V, [](const std::string &) { return false; }, &Levels);
  EXPECT_EQ(Levels, (std::vector<LadderLevel>{LadderLevel::L0, LadderLevel::L3}));
  EXPECT_GE(V.Notes.size(), 3u);
}

TEST(Escalation, HeuristicAndForeignFramesGiveNoFunctionRung) {
  auto V = violation(frame("fcn.00401000", std::nullopt, Confidence::BoundaryHeuristic),
                     frame("qsort", "stdlib/msort.c", Confidence::Debuginfo, false),
                     std::nullopt);
  for (const auto &R : V.Rungs)
    EXPECT_FALSE(R);
  EXPECT_FALSE(nextScope(V));
  EXPECT_EQ(V.State, Status::Unresolvable);
}

TEST(Escalation, ContractOnClosedViolation) {
  auto V = fullLadder();
  drive(V, [](const std::string &) { return true; });
  EXPECT_THROW(nextScope(V), ContractViolation);
  EXPECT_THROW(recordOutcome(V, false), ContractViolation);
}

TEST(Escalation, NameNormalization) {
  EXPECT_EQ(normalizeFunctionName("dispatch.cfi"), "dispatch");
  EXPECT_EQ(normalizeFunctionName("helper.llvm.1234567"), "helper");
  EXPECT_EQ(normalizeFunctionName("memcpy@GLIBC_2.14"), "memcpy");
  EXPECT_EQ(normalizeFunctionName("_ZN2ns1fEv.constprop.0"), "_ZN2ns1fEv");
  EXPECT_EQ(normalizeFunctionName("a.b"), "a.b");
  EXPECT_EQ(projectRelativeSource("/work/util-linux/lib/x.c", Root), "lib/x.c");
  EXPECT_EQ(projectRelativeSource("lib/../lib/x.c", Root), "lib/x.c");
  EXPECT_FALSE(projectRelativeSource("/usr/include/stdio.h", Root));
}

TEST(Escalation, KeyIdentity) {
  EXPECT_EQ(violationKey("/bin/app", 0x1a2b), "/bin/app@0x1a2b");
}

// Random ladders and random suppression sets: the engine stops at the first
// distinct, available rung that suppresses the trap.
TEST(EscalationProperty, FixedLevelIsMinimal) {
  const std::vector<std::string> Files = {"a.c", "b.c", "c.c"};
  const std::vector<std::string> Fns = {"f", "g", "h", "k"};
  std::uniform_int_distribution<int> Coin(0, 1), FnPick(0, 3), FilePick(0, 2);
  for (int Round = 0; Round < 5000; ++Round) {
    auto randomFrame = [&]() -> std::optional<ResolvedFrame> {
      if (Coin(rng()) && Coin(rng()))
        return std::nullopt;
      return frame(Fns[FnPick(rng())], Files[FilePick(rng())],
                   Coin(rng()) || Coin(rng()) ? Confidence::Debuginfo
                                              : Confidence::BoundaryHeuristic);
    };
    auto Callee = frame(Fns[FnPick(rng())], Files[FilePick(rng())]);
    auto Caller = randomFrame();
    auto CC = Caller ? randomFrame() : std::nullopt;
    auto V = violation(Callee, Caller, CC);
    std::set<std::string> Suppressing;
    for (const auto &F : Fns)
      if (Coin(rng()) && Coin(rng()))
        Suppressing.insert("fun:" + F);
    for (const auto &F : Files)
      if (Coin(rng()))
        Suppressing.insert("src:" + F);

    // Oracle: the ladder written out from the frames alone.
    std::vector<std::pair<LadderLevel, std::string>> Ladder;
    auto funOf = [](const std::optional<ResolvedFrame> &F) -> std::optional<std::string> {
      if (!F || F->Info->Conf == Confidence::BoundaryHeuristic)
        return std::nullopt;
      return "fun:" + *F->Info->Function;
    };
    auto srcOf = [](const std::optional<ResolvedFrame> &F) -> std::optional<std::string> {
      if (!F)
        return std::nullopt;
      return "src:" + F->Info->SourceFile->filename().string();
    };
    std::optional<ResolvedFrame> CalleeOpt = Callee;
    std::optional<std::string> Cands[5] = {funOf(CalleeOpt), funOf(Caller), funOf(CC),
                                           srcOf(CalleeOpt), srcOf(Caller)};
    std::set<std::string> Seen;
    std::optional<LadderLevel> ExpectFix;
    std::string ExpectLine;
    for (int L = 0; L < 5 && !ExpectFix; ++L) {
      if (!Cands[L] || !Seen.insert(*Cands[L]).second)
        continue;
      if (Suppressing.count(*Cands[L])) {
        ExpectFix = static_cast<LadderLevel>(L);
        ExpectLine = *Cands[L];
      }
    }

    std::vector<LadderLevel> Levels;
    auto Entries = drive(V, [&](const std::string &Line) { return Suppressing.count(Line) > 0; },
                         &Levels);
    ASSERT_TRUE(std::is_sorted(Levels.begin(), Levels.end()));
    ASSERT_LE(V.Attempts, 5);
    if (ExpectFix) {
      ASSERT_EQ(V.State, Status::Fixed);
      ASSERT_EQ(V.Level, *ExpectFix);
      ASSERT_EQ(active(Entries), (std::vector<std::string>{ExpectLine}));
    } else {
      ASSERT_EQ(V.State, Status::Unresolvable);
      ASSERT_TRUE(active(Entries).empty());
    }
  }
}
