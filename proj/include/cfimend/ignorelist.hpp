// Sanitizer special-case list maintained for the CFI build.
//
// The file holds plain global lines, one per active entry:
//
//   fun:<function>
//   src:<path relative to project_root>
//
// sorted by kind (fun before src) and then by pattern, newline-terminated.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cfimend {

namespace fs = std::filesystem;

/// Escalation rung. L0..L2 widen over functions (callee, caller, caller's
/// caller), L3..L4 over source files (callee's, caller's), L5 gives up.
enum class LadderLevel { L0, L1, L2, L3, L4, L5 };

std::string_view ladderLevelName(LadderLevel L);
std::optional<LadderLevel> parseLadderLevel(std::string_view Name);
inline LadderLevel nextLevel(LadderLevel L) {
  return L == LadderLevel::L5 ? L : static_cast<LadderLevel>(static_cast<int>(L) + 1);
}

struct IgnorelistEntry {
  enum class Kind { Fun, Src };

  Kind EntryKind = Kind::Fun;
  std::string Pattern;
  std::vector<std::string> Origins; // violation ids
  LadderLevel Level = LadderLevel::L0;
  bool Active = true;

  std::string line() const;
  bool sameRule(const IgnorelistEntry &O) const {
    return EntryKind == O.EntryKind && Pattern == O.Pattern;
  }
  bool operator==(const IgnorelistEntry &) const = default;
};

/// Canonical text of the active entries.
std::string renderIgnorelist(const std::vector<IgnorelistEntry> &Entries);

/// Reads fun:/src: lines; blank lines and '#' comments are skipped. Parsed
/// entries are active, have no origin, and take level L0 (fun) or L3 (src).
/// Throws Error naming the line for anything else.
std::vector<IgnorelistEntry> parseIgnorelist(std::string_view Text);

/// Union by (kind, pattern). On collision the origins are concatenated
/// (without repeats) and an inactive entry is reactivated.
std::vector<IgnorelistEntry> mergeEntry(std::vector<IgnorelistEntry> Existing,
                                        const IgnorelistEntry &New);

/// Drops Origin from the matching entry; the entry is deactivated once no
/// origin remains. Returns true if the entry became inactive.
bool retireOrigin(std::vector<IgnorelistEntry> &Entries, const IgnorelistEntry &Rule,
                  const std::string &Origin);

fs::path ignorelistPath(const fs::path &ReportDir);

/// Writes the rendered list under the project lock.
void writeIgnorelist(const fs::path &ReportDir, const std::vector<IgnorelistEntry> &Entries);

} // namespace cfimend
