#include "source_scan.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <cxxabi.h>
#include <memory>

namespace cfimend::detail {

namespace {

bool isIdentChar(char C) {
  return std::isalnum(static_cast<unsigned char>(C)) || C == '_' || C == '$';
}

std::size_t skipSpace(std::string_view M, std::size_t P) {
  while (P < M.size() && std::isspace(static_cast<unsigned char>(M[P])))
    ++P;
  return P;
}

// Index just past the bracket closing the one at Open, or npos.
std::size_t matchClose(std::string_view M, std::size_t Open) {
  char O = M[Open];
  char C = O == '(' ? ')' : O == '[' ? ']' : '}';
  int Depth = 0;
  for (std::size_t P = Open; P < M.size(); ++P) {
    if (M[P] == O)
      ++Depth;
    else if (M[P] == C && --Depth == 0)
      return P + 1;
  }
  return std::string_view::npos;
}

bool hasWord(std::string_view Text, std::string_view Word) {
  for (std::size_t P = Text.find(Word); P != std::string_view::npos;
       P = Text.find(Word, P + 1)) {
    bool Before = P == 0 || !isIdentChar(Text[P - 1]);
    bool After = P + Word.size() >= Text.size() || !isIdentChar(Text[P + Word.size()]);
    if (Before && After)
      return true;
  }
  return false;
}

} // namespace

std::string maskNonCode(std::string_view Src) {
  std::string Out(Src);
  enum class State { Code, LineComment, BlockComment, String, Char, Preproc };
  State S = State::Code;
  bool LineStart = true;
  for (std::size_t I = 0; I < Src.size(); ++I) {
    char C = Src[I];
    char Next = I + 1 < Src.size() ? Src[I + 1] : '\0';
    auto Blank = [&](std::size_t J) {
      if (Src[J] != '\n')
        Out[J] = ' ';
    };
    switch (S) {
    case State::Code:
      if (LineStart && C == '#') {
        S = State::Preproc;
        Blank(I);
      } else if (C == '/' && Next == '/') {
        S = State::LineComment;
        Blank(I);
      } else if (C == '/' && Next == '*') {
        S = State::BlockComment;
        Blank(I);
        Blank(++I);
      } else if (C == '"') {
        S = State::String;
        Blank(I);
      } else if (C == '\'') {
        S = State::Char;
        Blank(I);
      }
      break;
    case State::LineComment:
    case State::Preproc:
      if (C == '\\' && Next == '\n') {
        Blank(I);
        ++I;
      } else if (C == '\n') {
        S = State::Code;
      } else if (S == State::Preproc && C == '/' && Next == '*') {
        Blank(I);
        Blank(++I);
        // Block comment inside a directive: consume it, stay in Preproc.
        while (I + 1 < Src.size() && !(Src[I] == '*' && Src[I + 1] == '/'))
          Blank(++I);
        if (I + 1 < Src.size())
          Blank(++I);
      } else {
        Blank(I);
      }
      break;
    case State::BlockComment:
      if (C == '*' && Next == '/') {
        Blank(I);
        Blank(++I);
        S = State::Code;
      } else {
        Blank(I);
      }
      break;
    case State::String:
    case State::Char:
      if (C == '\\' && I + 1 < Src.size()) {
        Blank(I);
        Blank(++I);
      } else if ((S == State::String && C == '"') || (S == State::Char && C == '\'') ||
                 C == '\n') {
        Blank(I);
        S = State::Code;
      } else {
        Blank(I);
      }
      break;
    }
    if (C == '\n')
      LineStart = true;
    else if (!std::isspace(static_cast<unsigned char>(C)))
      LineStart = false;
  }
  return Out;
}

std::vector<DefinitionSite> findDefinitions(std::string_view Src, std::string_view Name) {
  std::vector<DefinitionSite> Sites;
  if (Name.empty())
    return Sites;
  std::string Masked = maskNonCode(Src);
  std::string_view M = Masked;

  // Brace depth at every offset; namespace and extern "C" blocks do not count.
  std::vector<int> Depth(M.size() + 1, 0);
  std::vector<bool> Opened; // true when the brace raised the depth
  int D = 0;
  for (std::size_t I = 0; I < M.size(); ++I) {
    Depth[I] = D;
    if (M[I] == '{') {
      std::size_t S = I;
      while (S > 0 && M[S - 1] != ';' && M[S - 1] != '{' && M[S - 1] != '}')
        --S;
      std::string_view Head = M.substr(S, I - S);
      bool Transparent = hasWord(Head, "namespace") ||
                         (hasWord(Head, "extern") && Head.find('(') == std::string_view::npos);
      Opened.push_back(!Transparent);
      D += !Transparent;
    } else if (M[I] == '}' && !Opened.empty()) {
      D -= Opened.back();
      Opened.pop_back();
    }
  }

  for (std::size_t P = M.find(Name); P != std::string_view::npos;
       P = M.find(Name, P + 1)) {
    std::size_t End = P + Name.size();
    if ((P > 0 && isIdentChar(M[P - 1])) || (End < M.size() && isIdentChar(M[End])))
      continue;
    if (Depth[P] != 0)
      continue;

    // Declaration start: after the previous ';', '{' or '}' at file scope.
    std::size_t Start = P;
    int Paren = 0;
    while (Start > 0) {
      char C = M[Start - 1];
      if (C == ')')
        ++Paren;
      else if (C == '(')
        --Paren;
      if (Paren == 0 && (C == ';' || C == '{' || C == '}'))
        break;
      --Start;
    }
    // The name must not sit inside a parameter list of another declarator.
    if (Paren != 0)
      continue;
    Start = skipSpace(M, Start);
    std::string_view Prefix = M.substr(Start, P - Start);
    if (hasWord(Prefix, "extern") || hasWord(Prefix, "typedef") ||
        hasWord(Prefix, "return"))
      continue;
    // A bare name with nothing in front is a statement or macro call.
    if (Prefix.find_first_not_of(" \t\r\n") == std::string_view::npos)
      continue;
    char LastPrefix = Prefix[Prefix.find_last_not_of(" \t\r\n")];
    if (LastPrefix == '.' || LastPrefix == '>' || LastPrefix == ',' || LastPrefix == '=' ||
        LastPrefix == '(')
      continue;

    std::size_t After = skipSpace(M, End);
    if (After >= M.size())
      continue;
    DefinitionSite Site{};
    if (M[After] == '(') {
      std::size_t Close = matchClose(M, After);
      if (Close == std::string_view::npos)
        continue;
      std::size_t Q = skipSpace(M, Close);
      // Trailing attributes and qualifiers before the body.
      while (Q < M.size() && isIdentChar(M[Q])) {
        std::size_t W = Q;
        while (W < M.size() && isIdentChar(M[W]))
          ++W;
        std::size_t N = skipSpace(M, W);
        if (N < M.size() && M[N] == '(') {
          std::size_t C2 = matchClose(M, N);
          if (C2 == std::string_view::npos)
            break;
          N = skipSpace(M, C2);
        }
        Q = N;
      }
      if (Q >= M.size() || M[Q] != '{')
        continue;
      Site.SiteKind = DefinitionSite::Kind::Function;
    } else if (M[After] == '=' || M[After] == ';' || M[After] == '[' || M[After] == ',') {
      if (M[After] == '=' && After + 1 < M.size() && M[After + 1] == '=')
        continue;
      Site.SiteKind = DefinitionSite::Kind::Object;
    } else {
      continue;
    }
    Site.DeclStart = Start;
    Site.NameOffset = P;
    Site.Line = 1 + static_cast<int>(std::count(M.begin(), M.begin() + Start, '\n'));
    Sites.push_back(Site);
  }
  return Sites;
}

std::string demangle(std::string_view Symbol) {
  std::string S(Symbol);
  if (S.rfind("_Z", 0) != 0)
    return S;
  int Status = 0;
  std::unique_ptr<char, void (*)(void *)> Out(
      abi::__cxa_demangle(S.c_str(), nullptr, nullptr, &Status), std::free);
  if (Status != 0 || !Out)
    return S;
  return Out.get();
}

std::string searchableName(std::string_view Symbol) {
  std::string S(Symbol);
  // Versioned references (sym@VER) and LTO/CFI clone suffixes.
  if (auto At = S.find('@'); At != std::string::npos && At > 0)
    S.resize(At);
  if (S.rfind("_Z", 0) == 0) {
    if (auto Dot = S.find('.'); Dot != std::string::npos)
      S.resize(Dot);
    S = demangle(S);
  } else if (auto Dot = S.find('.'); Dot != std::string::npos && Dot > 0) {
    S.resize(Dot);
  }
  // Drop the parameter list of a demangled name.
  int Angle = 0;
  for (std::size_t I = 0; I < S.size(); ++I) {
    if (S[I] == '<')
      ++Angle;
    else if (S[I] == '>')
      --Angle;
    else if (S[I] == '(' && Angle == 0) {
      S.resize(I);
      break;
    }
  }
  // Unqualified component, ignoring template arguments.
  Angle = 0;
  std::size_t Cut = 0;
  for (std::size_t I = 0; I + 1 < S.size(); ++I) {
    if (S[I] == '<')
      ++Angle;
    else if (S[I] == '>')
      --Angle;
    else if (Angle == 0 && S[I] == ':' && S[I + 1] == ':')
      Cut = I + 2;
  }
  S = S.substr(Cut);
  if (auto Lt = S.find('<'); Lt != std::string::npos)
    S.resize(Lt);
  while (!S.empty() && std::isspace(static_cast<unsigned char>(S.back())))
    S.pop_back();
  return S;
}

} // namespace cfimend::detail
