#include "cfimend/census.hpp"
#include "cfimend/error.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>

namespace cfimend {

IrSiteCensus &IrSiteCensus::operator+=(const IrSiteCensus &O) {
  FpCalls += O.FpCalls;
  VirtualCalls += O.VirtualCalls;
  CallbackStores += O.CallbackStores;
  JtSwitch += O.JtSwitch;
  JtLowered += O.JtLowered;
  InlineAsm += O.InlineAsm;
  return *this;
}

std::uint64_t totalSites(const IrSiteCensus &C) {
  return C.FpCalls + C.VirtualCalls + C.CallbackStores + C.JtSwitch + C.JtLowered +
         C.InlineAsm;
}

CensusResult &CensusResult::operator+=(const CensusResult &O) {
  Totals += O.Totals;
  Functions.insert(Functions.end(), O.Functions.begin(), O.Functions.end());
  Diagnostics.insert(Diagnostics.end(), O.Diagnostics.begin(), O.Diagnostics.end());
  return *this;
}

namespace {

struct Line {
  int No;
  std::string Text;
};

std::string trim(std::string_view S) {
  auto B = S.find_first_not_of(" \t");
  if (B == std::string_view::npos)
    return {};
  auto E = S.find_last_not_of(" \t\r");
  return std::string(S.substr(B, E - B + 1));
}

// Code part of an IR line: drops a trailing ';' comment outside quotes.
std::string stripComment(std::string_view S) {
  bool Quoted = false;
  for (std::size_t I = 0; I < S.size(); ++I) {
    if (S[I] == '"')
      Quoted = !Quoted;
    else if (S[I] == ';' && !Quoted)
      return trim(S.substr(0, I));
  }
  return trim(S);
}

bool balanced(std::string_view S) {
  std::string Stack;
  bool Quoted = false;
  for (char C : S) {
    if (C == '"') {
      Quoted = !Quoted;
      continue;
    }
    if (Quoted)
      continue;
    switch (C) {
    case '(':
    case '[':
    case '{':
      Stack += C;
      break;
    case ')':
    case ']':
    case '}': {
      char Open = C == ')' ? '(' : C == ']' ? '[' : '{';
      if (Stack.empty() || Stack.back() != Open)
        return false;
      Stack.pop_back();
      break;
    }
    default:
      break;
    }
  }
  return !Quoted && Stack.empty();
}

// Splits at commas that are not nested in brackets or quotes.
std::vector<std::string> splitOperands(std::string_view S) {
  std::vector<std::string> Out;
  int Depth = 0;
  bool Quoted = false;
  std::size_t Start = 0;
  for (std::size_t I = 0; I < S.size(); ++I) {
    char C = S[I];
    if (C == '"')
      Quoted = !Quoted;
    if (Quoted)
      continue;
    if (C == '(' || C == '[' || C == '{' || C == '<')
      ++Depth;
    else if (C == ')' || C == ']' || C == '}' || C == '>')
      --Depth;
    else if (C == ',' && Depth == 0) {
      Out.push_back(trim(S.substr(Start, I - Start)));
      Start = I + 1;
    }
  }
  Out.push_back(trim(S.substr(Start)));
  return Out;
}

std::string lastToken(std::string_view S) {
  auto T = trim(S);
  auto Sp = T.find_last_of(" \t");
  return Sp == std::string::npos ? T : T.substr(Sp + 1);
}

std::string unquote(std::string S) {
  if (S.size() >= 3 && (S[0] == '@' || S[0] == '%') && S[1] == '"')
    return S.substr(2, S.size() - 3);
  return S.substr(1);
}

const std::regex &globalRefRe() {
  static const std::regex Re(R"(@("[^"]*"|[-a-zA-Z$._0-9]+))");
  return Re;
}

std::vector<std::string> globalRefs(const std::string &S) {
  std::vector<std::string> Out;
  for (std::sregex_iterator It(S.begin(), S.end(), globalRefRe()), End; It != End; ++It)
    Out.push_back(unquote((*It)[0].str()));
  return Out;
}

// An instruction with its optional result name and the opcode-stripped rest.
struct Inst {
  std::string Result; // "%x" or empty
  std::string Opcode;
  std::string Rest;   // text after the opcode
  std::string Full;
};

Inst decode(const std::string &Code) {
  Inst I;
  I.Full = Code;
  std::string Body = Code;
  if (!Body.empty() && Body[0] == '%') {
    auto Eq = Body.find(" = ");
    if (Eq != std::string::npos) {
      I.Result = Body.substr(0, Eq);
      Body = Body.substr(Eq + 3);
    }
  }
  std::istringstream In(Body);
  std::string Word;
  while (In >> Word) {
    if (Word == "tail" || Word == "musttail" || Word == "notail")
      continue;
    if (Word.size() > 1 && Word.back() == ',') // "unreachable, !nosanitize !7"
      Word.pop_back();
    I.Opcode = Word;
    break;
  }
  auto Pos = Body.find(I.Opcode);
  I.Rest = trim(Body.substr(Pos == std::string::npos ? Body.size() : Pos + I.Opcode.size()));
  return I;
}

const std::set<std::string, std::less<>> KnownOpcodes = {
    "ret", "br", "switch", "indirectbr", "invoke", "resume", "unreachable", "cleanupret",
    "catchret", "catchswitch", "callbr", "fneg", "add", "fadd", "sub", "fsub", "mul", "fmul",
    "udiv", "sdiv", "fdiv", "urem", "srem", "frem", "shl", "lshr", "ashr", "and", "or", "xor",
    "extractelement", "insertelement", "shufflevector", "extractvalue", "insertvalue",
    "alloca", "load", "store", "fence", "cmpxchg", "atomicrmw", "getelementptr", "trunc",
    "zext", "sext", "fptrunc", "fpext", "fptoui", "fptosi", "uitofp", "sitofp", "ptrtoint",
    "inttoptr", "bitcast", "addrspacecast", "icmp", "fcmp", "phi", "select", "freeze", "call",
    "va_arg", "landingpad", "catchpad", "cleanuppad"};

struct ModuleFacts {
  std::set<std::string> Functions;     // defined or declared
  std::set<std::string> CodeTables;    // constant arrays of code pointers
  std::set<std::string> VtableTbaaTags;
  std::string SourceFile;
};

bool isCodeTableInit(const std::string &Init, const std::set<std::string> &Functions) {
  if (Init.find("blockaddress(") != std::string::npos)
    return true;
  for (const auto &R : globalRefs(Init))
    if (Functions.count(R))
      return true;
  return false;
}

ModuleFacts collectFacts(const std::vector<Line> &Lines) {
  ModuleFacts F;
  static const std::regex DefRe(R"(^(define|declare)\b[^@]*(@("[^"]*"|[-a-zA-Z$._0-9]+))\()");
  static const std::regex SrcRe(R"re(^source_filename\s*=\s*"([^"]*)")re");
  static const std::regex VtNodeRe(R"re(^!(\d+)\s*=\s*!\{!"vtable pointer")re");
  static const std::regex TagRe(R"(^!(\d+)\s*=\s*!\{!(\d+),\s*!(\d+),\s*i64 0)");
  std::set<std::string> VtNodes;
  std::vector<std::tuple<std::string, std::string>> Tags;
  std::vector<std::pair<std::string, std::string>> Globals; // name, initializer
  std::smatch M;
  for (const auto &L : Lines) {
    const auto &T = L.Text;
    if (std::regex_search(T, M, DefRe))
      F.Functions.insert(unquote(M[2].str()));
    else if (std::regex_search(T, M, SrcRe))
      F.SourceFile = M[1].str();
    else if (std::regex_search(T, M, VtNodeRe))
      VtNodes.insert(M[1].str());
    else if (std::regex_search(T, M, TagRe))
      Tags.emplace_back(M[1].str(), M[2].str());
    else if (!T.empty() && T[0] == '@') {
      auto Eq = T.find(" = ");
      if (Eq == std::string::npos)
        continue;
      auto Decl = T.substr(Eq + 3);
      // Only immutable aggregates qualify as tables.
      auto C = Decl.find("constant [");
      if (C == std::string::npos)
        continue;
      Globals.emplace_back(unquote(T.substr(0, Eq)), Decl.substr(C));
    }
  }
  for (const auto &[Name, Init] : Globals)
    if (isCodeTableInit(Init, F.Functions))
      F.CodeTables.insert(Name);
  for (const auto &[Tag, Base] : Tags)
    if (VtNodes.count(Base))
      F.VtableTbaaTags.insert(Tag);
  return F;
}

class FunctionScanner {
public:
  FunctionScanner(const ModuleFacts &Facts) : Facts(Facts) {}

  void add(const Inst &I) {
    if (!I.Result.empty())
      Defs[I.Result] = I;
    if (I.Opcode == "call" && I.Rest.find("@llvm.type.test(") != std::string::npos) {
      static const std::regex TypeTestRe(
          R"re(@llvm\.(?:public\.)?type\.test\(\s*[^,]*\s(%[-a-zA-Z$._0-9]+)\s*,\s*metadata !"([^"]*)")re");
      std::smatch M;
      if (std::regex_search(I.Rest, M, TypeTestRe)) {
        std::string Id = M[2].str();
        bool FunctionType = Id.rfind("_ZTSF", 0) == 0;
        if (!FunctionType)
          VtableValues.insert(stripCasts(M[1].str()));
      }
    }
  }

  std::string stripCasts(std::string V) const {
    for (int Guard = 0; Guard < 64; ++Guard) {
      auto It = Defs.find(V);
      if (It == Defs.end())
        return V;
      const Inst &D = It->second;
      if (D.Opcode == "bitcast" || D.Opcode == "addrspacecast") {
        auto To = D.Rest.rfind(" to ");
        if (To == std::string::npos)
          return V;
        V = lastToken(D.Rest.substr(0, To));
      } else {
        return V;
      }
    }
    return V;
  }

  const Inst *def(const std::string &V) const {
    auto It = Defs.find(V);
    return It == Defs.end() ? nullptr : &It->second;
  }

  // Pointer operand text of a load ("<ty>* <op>"), empty if not a load.
  static std::string loadPointer(const Inst &L) {
    if (L.Opcode != "load")
      return {};
    auto Ops = splitOperands(L.Rest);
    if (Ops.size() < 2)
      return {};
    return Ops[1];
  }

  bool isVtableLoad(const Inst &L) const {
    static const std::regex TbaaRe(R"(!tbaa !(\d+))");
    std::smatch M;
    if (std::regex_search(L.Full, M, TbaaRe) && Facts.VtableTbaaTags.count(M[1].str()))
      return true;
    auto Ptr = loadPointer(L);
    if (Ptr.empty())
      return false;
    // Typed pointers: the object pointer is reinterpreted as fn***.
    const Inst *Cast = def(lastToken(Ptr));
    return Cast && Cast->Opcode == "bitcast" && Cast->Rest.size() > 4 &&
           Cast->Rest.compare(Cast->Rest.size() - 4, 4, ")***") == 0;
  }

  bool isVirtualCallee(const std::string &Callee) const {
    std::string V = stripCasts(Callee);
    const Inst *D = def(V);
    if (!D)
      return false;
    if (D->Opcode == "extractvalue") {
      auto Ops = splitOperands(D->Rest);
      const Inst *Src = Ops.empty() ? nullptr : def(stripCasts(lastToken(Ops[0])));
      return Src && Src->Opcode == "call" &&
             Src->Rest.find("@llvm.type.checked.load(") != std::string::npos;
    }
    auto Ptr = loadPointer(*D);
    if (Ptr.empty())
      return false;
    std::string Slot = stripCasts(lastToken(Ptr));
    std::string Base = Slot;
    if (const Inst *G = def(Slot); G && G->Opcode == "getelementptr") {
      auto Ops = splitOperands(G->Rest.rfind("inbounds ", 0) == 0 ? G->Rest.substr(9) : G->Rest);
      if (Ops.size() != 3)
        return false;
      Base = stripCasts(lastToken(Ops[1]));
    }
    if (VtableValues.count(Base))
      return true;
    const Inst *VtLoad = def(Base);
    return VtLoad && VtLoad->Opcode == "load" && isVtableLoad(*VtLoad);
  }

  bool mentionsCodeTable(const std::string &S) const {
    for (const auto &R : globalRefs(S))
      if (Facts.CodeTables.count(R))
        return true;
    return false;
  }

  bool isLoweredTableCallee(const std::string &Callee) const {
    const Inst *D = def(stripCasts(Callee));
    if (!D)
      return false;
    auto Ptr = loadPointer(*D);
    if (Ptr.empty())
      return false;
    if (Ptr.find("getelementptr") != std::string::npos && mentionsCodeTable(Ptr))
      return true;
    const Inst *G = def(stripCasts(lastToken(Ptr)));
    if (!G || G->Opcode != "getelementptr")
      return false;
    auto Rest = G->Rest.rfind("inbounds ", 0) == 0 ? G->Rest.substr(9) : G->Rest;
    auto Ops = splitOperands(Rest);
    return Ops.size() >= 3 && mentionsCodeTable(Ops[1]);
  }

  bool storesFunctionAddress(const Inst &S) const {
    auto Rest = S.Rest.rfind("volatile ", 0) == 0 ? S.Rest.substr(9) : S.Rest;
    auto Ops = splitOperands(Rest);
    if (Ops.size() < 2)
      return false;
    for (const auto &R : globalRefs(Ops[0]))
      if (Facts.Functions.count(R))
        return true;
    return false;
  }

private:
  const ModuleFacts &Facts;
  std::map<std::string, Inst> Defs;
  std::set<std::string> VtableValues;
};

enum class CallKind { Direct, Asm, Virtual, Lowered, Pointer, Malformed };

CallKind classifyCall(const Inst &I, const FunctionScanner &S) {
  static const std::regex AsmRe(R"(\basm\s+(sideeffect\s+|alignstack\s+|inteldialect\s+|unwind\s+)*")");
  if (std::regex_search(I.Rest, AsmRe))
    return CallKind::Asm;
  static const std::regex CalleeRe(R"(([%@](?:"[^"]*"|[-a-zA-Z$._0-9]+))\()");
  std::smatch M;
  if (!std::regex_search(I.Rest, M, CalleeRe)) {
    if (I.Rest.find('@') != std::string::npos &&
        (I.Rest.find("bitcast (") != std::string::npos ||
         I.Rest.find("getelementptr") != std::string::npos))
      return CallKind::Direct;
    return CallKind::Malformed;
  }
  std::string Callee = M[1].str();
  if (Callee[0] == '@')
    return CallKind::Direct;
  if (S.isVirtualCallee(Callee))
    return CallKind::Virtual;
  if (S.isLoweredTableCallee(Callee))
    return CallKind::Lowered;
  return CallKind::Pointer;
}

bool isLabel(const std::string &Code) {
  if (Code.empty() || Code.back() != ':')
    return false;
  return Code.find(' ') == std::string::npos || Code.front() == '"';
}

bool startsWithLowerWord(const std::string &Code) {
  return !Code.empty() && std::islower(static_cast<unsigned char>(Code[0]));
}

CensusResult censusModule(const std::vector<Line> &Lines) {
  CensusResult R;
  ModuleFacts Facts = collectFacts(Lines);
  static const std::regex DefineRe(R"(^define\b(.*?)(@("[^"]*"|[-a-zA-Z$._0-9]+))\()");

  bool InModuleAsm = false;
  std::optional<IrFunction> Fn;
  std::optional<FunctionScanner> Scanner;
  bool InSwitch = false;

  auto diag = [&](const Line &L, std::string Reason) {
    R.Diagnostics.push_back({L.No, L.Text, std::move(Reason)});
  };

  for (const auto &L : Lines) {
    std::string Code = stripComment(L.Text);

    if (!Fn) {
      bool ModuleAsm = Code.rfind("module asm ", 0) == 0;
      if (ModuleAsm && !InModuleAsm)
        ++R.Totals.InlineAsm;
      InModuleAsm = ModuleAsm;
      std::smatch M;
      if (std::regex_search(Code, M, DefineRe) && !Code.empty() && Code.back() == '{') {
        Fn.emplace();
        Fn->Name = unquote(M[2].str());
        Fn->SourceFile = Facts.SourceFile;
        std::string Prefix = M[1].str();
        std::istringstream Words(Prefix);
        std::string W;
        bool Hidden = false;
        while (Words >> W)
          if (W == "hidden" || W == "internal" || W == "private")
            Hidden = true;
        Fn->DefaultVisibility = !Hidden;
        Scanner.emplace(Facts);
        InSwitch = false;
      }
      continue;
    }

    if (Code == "}") {
      R.Totals += Fn->Sites;
      R.Functions.push_back(std::move(*Fn));
      Fn.reset();
      Scanner.reset();
      continue;
    }
    if (Code.empty() || isLabel(Code))
      continue;
    if (InSwitch) {
      if (Code.find(']') != std::string::npos)
        InSwitch = false;
      continue;
    }
    bool Open = Code.back() == '[' && Code.rfind("switch ", 0) == 0;
    if (!Open && !balanced(Code)) {
      diag(L, "unbalanced brackets or quotes");
      continue;
    }
    bool HasResult = Code[0] == '%' && Code.find(" = ") != std::string::npos;
    if (!HasResult && !startsWithLowerWord(Code)) {
      diag(L, "not an instruction");
      continue;
    }
    Inst I = decode(Code);
    if (I.Opcode.empty() || !startsWithLowerWord(I.Opcode)) {
      diag(L, "missing opcode");
      continue;
    }
    // Continuations of invoke and landingpad.
    if (!HasResult && (I.Opcode == "to" || I.Opcode == "cleanup" || I.Opcode == "catch" ||
                       I.Opcode == "filter"))
      continue;
    if (!KnownOpcodes.count(I.Opcode)) {
      diag(L, "unknown opcode '" + I.Opcode + "'");
      continue;
    }
    Scanner->add(I);
    auto &Sites = Fn->Sites;
    if (I.Opcode == "call" || I.Opcode == "invoke" || I.Opcode == "callbr") {
      switch (classifyCall(I, *Scanner)) {
      case CallKind::Asm:
        ++Sites.InlineAsm;
        break;
      case CallKind::Virtual:
        ++Sites.VirtualCalls;
        break;
      case CallKind::Lowered:
        ++Sites.JtLowered;
        break;
      case CallKind::Pointer:
        ++Sites.FpCalls;
        break;
      case CallKind::Malformed:
        diag(L, "call without a recognizable callee");
        break;
      case CallKind::Direct:
        break;
      }
    } else if (I.Opcode == "indirectbr") {
      ++Sites.JtLowered;
    } else if (I.Opcode == "store") {
      if (Scanner->storesFunctionAddress(I))
        ++Sites.CallbackStores;
    } else if (I.Opcode == "switch") {
      ++Sites.JtSwitch;
      InSwitch = Open;
    }
  }
  if (Fn) {
    Line Last = Lines.empty() ? Line{0, ""} : Lines.back();
    diag(Last, "function '" + Fn->Name + "' is not terminated");
  }
  return R;
}

} // namespace

CensusResult censusText(std::string_view IrText) {
  CensusResult Result;
  std::vector<Line> Module;
  std::istringstream In{std::string(IrText)};
  std::string Text;
  int No = 0;
  while (std::getline(In, Text)) {
    ++No;
    if (Text.rfind("; ModuleID", 0) == 0 && !Module.empty()) {
      Result += censusModule(Module);
      Module.clear();
    }
    Module.push_back({No, Text});
  }
  if (!Module.empty())
    Result += censusModule(Module);
  return Result;
}

CensusResult censusDirectory(const fs::path &Dir) {
  std::error_code EC;
  if (!fs::is_directory(Dir, EC))
    throw Error("IR directory not found: " + Dir.string());
  std::vector<fs::path> Files;
  for (auto It = fs::recursive_directory_iterator(
           Dir, fs::directory_options::skip_permission_denied, EC);
       It != fs::recursive_directory_iterator(); It.increment(EC)) {
    if (EC)
      break;
    if (It->is_regular_file(EC) && It->path().extension() == ".ll")
      Files.push_back(It->path());
  }
  std::sort(Files.begin(), Files.end());
  CensusResult Total;
  for (const auto &F : Files) {
    std::ifstream In(F, std::ios::binary);
    std::stringstream SS;
    SS << In.rdbuf();
    auto R = censusText(SS.str());
    for (auto &D : R.Diagnostics)
      D.Reason = F.string() + ": " + D.Reason;
    Total += R;
  }
  return Total;
}

} // namespace cfimend
