// Address to function / source-location resolution.
//
// Binary introspection goes through AnalysisBackend, a narrow adapter that
// answers a request (binary, query kind, address) with line records:
//
//   fcn <start-hex> <end-hex> <label>   function span (Functions query)
//   loc <function> <file> <line>        inline frame, innermost first (LineInfo)
//   warn <text>                         non-fatal problem
//
// Unknown fields are written as "??". The default backend drives binutils
// (objdump for boundary discovery, addr2line for DWARF line tables).
#pragma once

#include "cfimend/trace.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace cfimend {

enum class Confidence { Debuginfo, SymbolTable, BoundaryHeuristic };

std::string_view confidenceName(Confidence C);

struct SymbolInfo {
  std::optional<std::string> Function;
  std::optional<fs::path> SourceFile;
  std::optional<int> Line;
  Confidence Conf = Confidence::BoundaryHeuristic;

  bool operator==(const SymbolInfo &) const = default;
};

struct FunctionSpan {
  std::string Name;
  Address Start = 0;
  Address End = 0; // exclusive
  bool FromSymbolTable = false;

  bool contains(Address A) const { return A >= Start && A < End; }
  bool operator==(const FunctionSpan &) const = default;
};

enum class QueryKind { Functions, LineInfo };

struct BackendRequest {
  fs::path Binary;
  QueryKind Kind = QueryKind::Functions;
  Address Addr = 0;
};

class AnalysisBackend {
public:
  virtual ~AnalysisBackend() = default;
  virtual std::vector<std::string> query(const BackendRequest &Req) = 0;
};

/// objdump/addr2line implementation of the adapter.
class BinutilsBackend : public AnalysisBackend {
public:
  std::vector<std::string> query(const BackendRequest &Req) override;
};

/// Entry-point discovery over `objdump -d` text of a binary whose code
/// sections are given; exposed for testing. Produces "fcn" records.
std::vector<std::string> heuristicSpansFromDisassembly(std::string_view ObjdumpText,
                                                       Address Entry,
                                                       const std::vector<std::pair<Address, Address>> &CodeRanges);

/// Image and link-time address behind a runtime address.
struct StaticAddress {
  fs::path Image;
  Address Addr = 0;
};

class Symbolizer {
public:
  explicit Symbolizer(std::shared_ptr<AnalysisBackend> Backend =
                          std::make_shared<BinutilsBackend>());

  /// Sorted, non-overlapping spans. Symbol-table spans win; the backend's
  /// heuristic spans fill the gaps. Unparseable input yields no spans and a
  /// warning.
  std::vector<FunctionSpan> functionBoundaries(const fs::path &Binary,
                                               std::vector<std::string> *Warnings = nullptr);

  /// Best available answer for a link-time address: debug info, then the
  /// symbol table, then the boundary heuristic. Throws ResolutionError if the
  /// address lies outside every span.
  SymbolInfo resolve(const fs::path &Binary, Address Addr);

  /// Removes the load bias using the process map captured at trap time.
  std::optional<StaticAddress> toStatic(const std::vector<MemoryMapping> &Maps,
                                        Address Runtime);

private:
  std::shared_ptr<AnalysisBackend> Backend;
  std::mutex Mutex;
  std::map<std::string, std::vector<FunctionSpan>> SpanCache;
};

} // namespace cfimend
