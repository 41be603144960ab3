// Textual C/C++ scanning used to find symbol definition sites.
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace cfimend::detail {

/// Returns Src with comments, string/char literals and preprocessor lines
/// replaced by spaces. Newlines are kept so offsets and lines still match.
std::string maskNonCode(std::string_view Src);

struct DefinitionSite {
  enum class Kind { Function, Object };
  Kind SiteKind;
  std::size_t DeclStart; // offset of the first token of the declaration
  std::size_t NameOffset;
  int Line;              // 1-based line of DeclStart
};

/// File-scope definitions of Name: function bodies and non-extern object
/// definitions. Prototypes, extern declarations and typedefs are skipped.
std::vector<DefinitionSite> findDefinitions(std::string_view Src, std::string_view Name);

/// Unqualified identifier to search for: demangles _Z names, drops
/// parameter lists, scope qualifiers and compiler-added suffixes.
std::string searchableName(std::string_view Symbol);

/// Itanium demangling; returns the input unchanged if it is not mangled.
std::string demangle(std::string_view Symbol);

} // namespace cfimend::detail
