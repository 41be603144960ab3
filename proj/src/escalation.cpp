#include "cfimend/escalation.hpp"
#include "cfimend/error.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace cfimend {

namespace {

bool isUnder(const fs::path &P, const fs::path &Root) {
  std::error_code EC;
  auto A = fs::weakly_canonical(P, EC);
  auto R = fs::weakly_canonical(Root, EC);
  auto Rel = A.lexically_relative(R);
  return !Rel.empty() && *Rel.begin() != "..";
}

ResolvedFrame resolveFrame(Address Runtime, const TrapEvent &Trap, const fs::path &Root,
                           Symbolizer &Sym) {
  ResolvedFrame F;
  F.Runtime = Runtime;
  F.Static = Sym.toStatic(Trap.Mappings, Runtime);
  if (!F.Static && Trap.Mappings.empty() && !Trap.Binary.empty())
    F.Static = StaticAddress{Trap.Binary, Runtime};
  if (!F.Static)
    return F;
  F.InProject = isUnder(F.Static->Image, Root);
  try {
    F.Info = Sym.resolve(F.Static->Image, F.Static->Addr);
  } catch (const ResolutionError &) {
  }
  return F;
}

std::optional<IgnorelistEntry> funRung(const std::optional<ResolvedFrame> &F, LadderLevel L) {
  if (!F || !F->Info || !F->Info->Function || !F->InProject ||
      F->Info->Conf == Confidence::BoundaryHeuristic)
    return std::nullopt;
  IgnorelistEntry E;
  E.EntryKind = IgnorelistEntry::Kind::Fun;
  E.Pattern = normalizeFunctionName(*F->Info->Function);
  E.Level = L;
  if (E.Pattern.empty())
    return std::nullopt;
  return E;
}

std::optional<IgnorelistEntry> srcRung(const std::optional<ResolvedFrame> &F, LadderLevel L,
                                       const fs::path &Root) {
  if (!F || !F->Info || !F->Info->SourceFile || !F->InProject)
    return std::nullopt;
  auto Rel = projectRelativeSource(*F->Info->SourceFile, Root);
  if (!Rel)
    return std::nullopt;
  IgnorelistEntry E;
  E.EntryKind = IgnorelistEntry::Kind::Src;
  E.Pattern = *Rel;
  E.Level = L;
  return E;
}

constexpr std::string_view RungRole[] = {"callee function", "caller function",
                                         "caller's caller function", "callee source file",
                                         "caller source file"};

// Moves V.Level forward to the first rung that has an untried entry.
void settle(Violation &V) {
  while (V.Level != LadderLevel::L5) {
    int I = static_cast<int>(V.Level);
    const auto &R = V.Rungs[I];
    if (!R) {
      V.Notes.push_back(fmt::format("{} skipped: {} unavailable", ladderLevelName(V.Level),
                                    RungRole[I]));
    } else if (std::find(V.Tried.begin(), V.Tried.end(), R->line()) != V.Tried.end()) {
      V.Notes.push_back(fmt::format("{} skipped: {} already tried", ladderLevelName(V.Level),
                                    R->line()));
    } else {
      return;
    }
    V.Level = nextLevel(V.Level);
  }
  V.State = Violation::Status::Unresolvable;
  V.Pending.reset();
}

} // namespace

std::string_view violationStatusName(Violation::Status S) {
  switch (S) {
  case Violation::Status::Open:
    return "Open";
  case Violation::Status::Fixed:
    return "Fixed";
  case Violation::Status::Unresolvable:
    return "Unresolvable";
  }
  return "?";
}

std::string violationKey(const std::string &Image, Address StaticFaultPc) {
  return fmt::format("{}@{:#x}", Image, StaticFaultPc);
}

std::string Violation::key() const { return violationKey(Image, StaticFaultPc); }

std::string normalizeFunctionName(std::string_view Name) {
  std::string N(Name);
  if (auto At = N.find('@'); At != std::string::npos)
    N.resize(At);
  for (;;) {
    auto Dot = N.rfind('.');
    if (Dot == std::string::npos || Dot == 0)
      break;
    std::string_view Tail = std::string_view(N).substr(Dot + 1);
    bool Digits = !Tail.empty() && std::all_of(Tail.begin(), Tail.end(), ::isdigit);
    if (Tail == "cfi" || Tail == "cfi_jt" || Tail == "llvm" || Tail == "isra" ||
        Tail == "constprop" || Tail == "part" || Tail == "cold" || Digits)
      N.resize(Dot);
    else
      break;
  }
  return N;
}

std::optional<std::string> projectRelativeSource(const fs::path &File, const fs::path &Root) {
  std::error_code EC;
  fs::path Abs = File.is_absolute() ? File : Root / File;
  auto Rel = fs::weakly_canonical(Abs, EC)
                 .lexically_relative(fs::weakly_canonical(Root, EC));
  if (Rel.empty() || *Rel.begin() == "..")
    return std::nullopt;
  return Rel.generic_string();
}

void deriveRungs(Violation &V, const fs::path &Root) {
  V.Rungs[0] = funRung(V.Callee, LadderLevel::L0);
  V.Rungs[1] = funRung(V.Caller, LadderLevel::L1);
  V.Rungs[2] = funRung(V.CallersCaller, LadderLevel::L2);
  V.Rungs[3] = srcRung(V.Callee, LadderLevel::L3, Root);
  V.Rungs[4] = srcRung(V.Caller, LadderLevel::L4, Root);
}

Violation makeViolation(const TrapEvent &Trap, const std::string &TestId, const fs::path &Root,
                        Symbolizer &Sym) {
  Violation V;
  V.Trap = Trap;
  V.TestIds.push_back(TestId);
  V.Callee = resolveFrame(Trap.FaultPc, Trap, Root, Sym);
  if (V.Callee.Static) {
    V.Image = V.Callee.Static->Image;
    V.StaticFaultPc = V.Callee.Static->Addr;
  } else {
    V.Image = Trap.Binary;
    V.StaticFaultPc = Trap.FaultPc;
  }
  // Return addresses point after the call; step back into it.
  if (Trap.ReturnAddresses.size() > 0)
    V.Caller = resolveFrame(Trap.ReturnAddresses[0] - 1, Trap, Root, Sym);
  if (Trap.ReturnAddresses.size() > 1)
    V.CallersCaller = resolveFrame(Trap.ReturnAddresses[1] - 1, Trap, Root, Sym);
  else
    V.Notes.push_back("no second return address; caller's caller unknown");
  V.Id = fmt::format("v-{}-{:x}", fs::path(V.Image).filename().string(), V.StaticFaultPc);
  deriveRungs(V, Root);
  return V;
}

std::optional<IgnorelistEntry> nextScope(Violation &V) {
  if (V.State != Violation::Status::Open)
    throw ContractViolation("nextScope on a violation that is not Open: " + V.Id);
  settle(V);
  if (V.State == Violation::Status::Unresolvable)
    return std::nullopt;
  IgnorelistEntry E = *V.Rungs[static_cast<int>(V.Level)];
  E.Origins = {V.Id};
  E.Level = V.Level;
  E.Active = true;
  V.Pending = E;
  V.Tried.push_back(E.line());
  ++V.Attempts;
  return E;
}

std::optional<IgnorelistEntry> recordOutcome(Violation &V, bool TrapRecurred) {
  if (V.State != Violation::Status::Open || !V.Pending)
    throw ContractViolation("recordOutcome without a pending entry: " + V.Id);
  if (!TrapRecurred) {
    V.State = Violation::Status::Fixed;
    return std::nullopt;
  }
  auto Retired = V.Pending;
  V.Pending.reset();
  V.Level = nextLevel(V.Level);
  settle(V);
  return Retired;
}

} // namespace cfimend
