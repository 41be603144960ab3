// Per-violation escalation ladder.
#pragma once

#include "cfimend/ignorelist.hpp"
#include "cfimend/symbolizer.hpp"
#include "cfimend/trace.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace cfimend {

/// One symbolized frame of a trap: the fault PC itself or a return address
/// moved back by one byte into the call instruction.
struct ResolvedFrame {
  Address Runtime = 0;
  std::optional<StaticAddress> Static;
  std::optional<SymbolInfo> Info;
  bool InProject = false; // image lies under project_root
};

struct Violation {
  enum class Status { Open, Fixed, Unresolvable };

  std::string Id;
  std::vector<std::string> TestIds;
  TrapEvent Trap;
  std::string Image;       // binary identity (absolute path)
  Address StaticFaultPc = 0;
  ResolvedFrame Callee;
  std::optional<ResolvedFrame> Caller;
  std::optional<ResolvedFrame> CallersCaller;
  // Candidate entry per rung L0..L4, fixed when the violation is created;
  // unset where the identity is unavailable.
  std::array<std::optional<IgnorelistEntry>, 5> Rungs;
  LadderLevel Level = LadderLevel::L0;
  Status State = Status::Open;
  std::optional<IgnorelistEntry> Pending; // entry active for the current level
  std::vector<std::string> Tried;         // rendered entries already attempted
  std::vector<std::string> Notes;         // skipped levels and why
  int Attempts = 0;

  std::string key() const;
};

std::string_view violationStatusName(Violation::Status S);

/// Deduplication key: (static fault address, binary identity).
std::string violationKey(const std::string &Image, Address StaticFaultPc);

/// Function name as a `fun:` pattern: compiler-generated suffixes such as
/// ".cfi" and ".llvm.<n>" are dropped.
std::string normalizeFunctionName(std::string_view Name);

/// Pattern for a source file, relative to Root; nullopt outside Root.
std::optional<std::string> projectRelativeSource(const fs::path &File, const fs::path &Root);

/// Symbolizes a trap into a fresh Open violation at L0.
Violation makeViolation(const TrapEvent &Trap, const std::string &TestId, const fs::path &Root,
                        Symbolizer &Sym);

/// Fills V.Rungs from the resolved frames. fun: rungs need a name from debug
/// info or the symbol table, src: rungs a source file under Root; both only
/// for frames inside a project image.
void deriveRungs(Violation &V, const fs::path &Root);

/// The entry for the violation's current level. Levels whose identity is
/// unavailable, or whose entry repeats one already tried, are skipped and
/// noted; reaching L5 marks the violation Unresolvable and returns nullopt.
/// Sets V.Pending on success.
std::optional<IgnorelistEntry> nextScope(Violation &V);

/// Applies the re-run verdict. A clean re-run fixes the violation at its
/// current level (its pending entry stays, origin = V.Id). A recurring trap
/// retires the pending entry's origin and advances the ladder; exhausting
/// the ladder marks the violation Unresolvable. Returns the retired entry,
/// if any, so the caller can update the ignorelist.
std::optional<IgnorelistEntry> recordOutcome(Violation &V, bool TrapRecurred);

} // namespace cfimend
