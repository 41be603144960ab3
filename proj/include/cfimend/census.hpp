// Indirect control-flow census over textual LLVM IR.
//
// Every instruction falls into at most one category, tested in this order:
//
//   inline_asm       call-form `asm` expressions; each `module asm` block
//   virtual_calls    indirect call whose callee is loaded from a vtable: a
//                    pointer marked by llvm.type.test on a class type id, a
//                    load tagged "vtable pointer" in TBAA, the result of
//                    llvm.type.checked.load, or the typed-pointer idiom
//                    `bitcast obj to fn***` -> load -> [gep idx] -> load
//   jt_lowered       indirectbr, or an indirect call whose callee is loaded
//                    through a getelementptr into a constant global array of
//                    code pointers
//   fp_calls         any other call/invoke through a register
//   callback_stores  store whose value operand is a function address
//   jt_switch        switch instructions
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cfimend {

namespace fs = std::filesystem;

struct IrSiteCensus {
  std::uint64_t FpCalls = 0;
  std::uint64_t VirtualCalls = 0;
  std::uint64_t CallbackStores = 0;
  std::uint64_t JtSwitch = 0;
  std::uint64_t JtLowered = 0;
  std::uint64_t InlineAsm = 0;

  IrSiteCensus &operator+=(const IrSiteCensus &O);
  friend IrSiteCensus operator+(IrSiteCensus A, const IrSiteCensus &B) { return A += B; }
  bool operator==(const IrSiteCensus &) const = default;
};

std::uint64_t totalSites(const IrSiteCensus &C);

struct IrFunction {
  std::string Name;       // IR symbol name, unquoted
  std::string SourceFile; // module source_filename
  bool DefaultVisibility = false;
  IrSiteCensus Sites;
};

struct IrDiagnostic {
  int Line = 0; // 1-based within the input text
  std::string Text;
  std::string Reason;
};

struct CensusResult {
  IrSiteCensus Totals;
  std::vector<IrFunction> Functions;
  std::vector<IrDiagnostic> Diagnostics;

  CensusResult &operator+=(const CensusResult &O);
};

/// Census of one or more modules (split at "; ModuleID" lines).
CensusResult censusText(std::string_view IrText);

inline IrSiteCensus census(std::string_view IrText) { return censusText(IrText).Totals; }

/// All *.ll files under Dir, in sorted path order. Diagnostics carry the
/// file name in their reason.
CensusResult censusDirectory(const fs::path &Dir);

} // namespace cfimend
