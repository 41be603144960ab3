#include "cfimend/build.hpp"
#include "cfimend/error.hpp"
#include "cfimend/process.hpp"

#include <fmt/format.h>

#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <fstream>
#include <map>
#include <mutex>
#include <regex>
#include <sys/file.h>
#include <unistd.h>

namespace cfimend {

std::string_view diagnosticKindName(Diagnostic::Kind K) {
  switch (K) {
  case Diagnostic::Kind::UndefinedReference:
    return "UndefinedReference";
  case Diagnostic::Kind::HiddenSymbolMismatch:
    return "HiddenSymbolMismatch";
  case Diagnostic::Kind::Other:
    return "Other";
  }
  return "Other";
}

std::vector<std::string> composeFlags(const BuildMode &Mode,
                                      const std::vector<std::string> &ExtraFlags) {
  std::vector<std::string> Flags;
  if (Mode.isCfi()) {
    if (!Mode.IgnorelistPath)
      throw ContractViolation("Cfi build mode requires an ignorelist path");
    if (Mode.Variants.empty())
      throw ContractViolation("Cfi build mode requires at least one variant");
    Flags.push_back("-flto");
    Flags.push_back("-fvisibility=hidden");
    std::string Sanitize = "-fsanitize=";
    for (std::size_t I = 0; I < Mode.Variants.size(); ++I) {
      if (I)
        Sanitize += ',';
      Sanitize += variantName(Mode.Variants[I]);
    }
    Flags.push_back(std::move(Sanitize));
    Flags.push_back("-fsanitize-ignorelist=" + Mode.IgnorelistPath->string());
    Flags.push_back("-fno-omit-frame-pointer");
  } else if (Mode.IgnorelistPath || !Mode.Variants.empty()) {
    throw ContractViolation("Baseline build mode carries no ignorelist or variants");
  }
  Flags.insert(Flags.end(), ExtraFlags.begin(), ExtraFlags.end());
  return Flags;
}

namespace {

struct Grammar {
  std::regex Pattern;
  Diagnostic::Kind Kind;
  int SymbolGroup;
  int ObjectGroup; // 0 if absent
};

const std::vector<Grammar> &grammars() {
  static const std::vector<Grammar> G = {
      // GNU ld: "obj: in function `f': x.c:(.text+0x5): undefined reference to `sym'"
      // gold:   "obj:file:function f: error: undefined reference to 'sym'"
      {std::regex(R"(^(?:(\S[^:]*):)?.*undefined reference to [`'](.+)'\s*$)"),
       Diagnostic::Kind::UndefinedReference, 2, 1},
      {std::regex(R"(error: undefined (?:hidden|protected) symbol: (.+?)\s*$)"),
       Diagnostic::Kind::HiddenSymbolMismatch, 1, 0},
      {std::regex(R"(error: undefined symbol: (.+?)\s*$)"),
       Diagnostic::Kind::UndefinedReference, 1, 0},
      {std::regex(R"(hidden symbol [`'](.+?)' (?:in (.+?) )?is referenced by DSO)"),
       Diagnostic::Kind::HiddenSymbolMismatch, 1, 2},
      {std::regex(R"(hidden symbol [`'](.+?)' isn't defined)"),
       Diagnostic::Kind::HiddenSymbolMismatch, 1, 0},
      {std::regex(R"(non-exported symbol '(.+?)' in '(.+?)' is referenced by DSO)"),
       Diagnostic::Kind::HiddenSymbolMismatch, 1, 2},
  };
  return G;
}

} // namespace

std::vector<Diagnostic> parseDiagnostics(std::string_view RawLog) {
  std::vector<Diagnostic> Out;
  std::size_t Pos = 0;
  while (Pos < RawLog.size()) {
    std::size_t End = RawLog.find('\n', Pos);
    if (End == std::string_view::npos)
      End = RawLog.size();
    std::string Line(RawLog.substr(Pos, End - Pos));
    Pos = End + 1;
    if (!Line.empty() && Line.back() == '\r')
      Line.pop_back();

    bool Candidate = Line.find("undefined") != std::string::npos ||
                     Line.find("symbol") != std::string::npos;
    bool Matched = false;
    if (Candidate) {
      for (const auto &G : grammars()) {
        std::smatch M;
        if (!std::regex_search(Line, M, G.Pattern))
          continue;
        Diagnostic D;
        D.DiagKind = G.Kind;
        D.Symbol = M[G.SymbolGroup].str();
        if (G.ObjectGroup && M[G.ObjectGroup].matched && M[G.ObjectGroup].length() > 0)
          D.SourceObject = M[G.ObjectGroup].str();
        D.Message = Line;
        Out.push_back(std::move(D));
        Matched = true;
        break;
      }
    }
    if (!Matched && Line.find("error:") != std::string::npos) {
      Diagnostic D;
      D.Message = Line;
      Out.push_back(std::move(D));
    }
  }
  return Out;
}

namespace {

std::string substituteFlags(std::string Cmd, const std::string &Flags) {
  static const std::string Token = "{FLAGS}";
  for (std::size_t P = Cmd.find(Token); P != std::string::npos;
       P = Cmd.find(Token, P + Flags.size()))
    Cmd.replace(P, Token.size(), Flags);
  return Cmd;
}

EnvOverrides flagEnvironment(const std::string &Flags) {
  EnvOverrides Env;
  for (const char *Var : {"CFLAGS", "CXXFLAGS", "LDFLAGS"}) {
    std::string Value = Flags;
    if (const char *Existing = std::getenv(Var); Existing && *Existing)
      Value = std::string(Existing) + " " + Flags;
    Env.emplace_back(Var, Value);
  }
  return Env;
}

} // namespace

BuildOutcome runBuild(const ProjectConfig &Cfg, const BuildMode &Mode,
                      const BuildStep &Step) {
  ProjectLock Lock(Cfg.ReportDir);
  auto FlagList = composeFlags(Mode, Cfg.ExtraCompileFlags);
  std::string Flags = shellJoin(FlagList);
  EnvOverrides Env = flagEnvironment(Flags);

  BuildOutcome Outcome;
  std::string Log;
  bool Failed = false;
  auto Run = [&](const std::string &Label, const std::string &Script) {
    Log += fmt::format("$ [{}] {}\n", Label, Script);
    ShellCommand Cmd{Script, Cfg.ProjectRoot, Env, std::nullopt, 64u << 20};
    ShellResult R = runShell(Cmd);
    Outcome.WallSeconds += R.WallSeconds;
    if (!R.Signalled && (R.ExitCode == 126 || R.ExitCode == 127))
      throw OrchestrationError(fmt::format("{} command not executable (exit {}): {}\n{}",
                                           Label, R.ExitCode, Script, R.Output));
    Log += R.Output;
    if (R.Signalled || R.ExitCode != 0) {
      Log += fmt::format("[{} exited with {}{}]\n", Label,
                         R.Signalled ? "signal " : "status ",
                         R.Signalled ? R.Signal : R.ExitCode);
      Failed = true;
    }
  };

  if (Cfg.CleanCmd)
    Run("clean", substituteFlags(*Cfg.CleanCmd, Flags));
  if (!Failed && Cfg.ConfigureCmd && Step.RunConfigure)
    Run("configure", substituteFlags(*Cfg.ConfigureCmd, Flags));
  if (!Failed)
    Run("build", substituteFlags(Cfg.BuildCmd, Flags));

  constexpr std::size_t Cap = 64u << 20;
  if (Log.size() > Cap) {
    Log.resize(Cap);
    Log += truncationMarker(Cap);
  }

  for (const auto &Exe : Cfg.Executables) {
    fs::path P = fs::path(Exe).is_absolute() ? fs::path(Exe) : Cfg.ProjectRoot / Exe;
    std::error_code EC;
    if (fs::is_regular_file(P, EC))
      Outcome.ProducedExecutables.push_back(P.lexically_normal());
  }
  bool AllPresent = Outcome.ProducedExecutables.size() == Cfg.Executables.size();
  if (!Failed && !AllPresent)
    Log += "error: build finished but configured executables are missing\n";
  Outcome.Diagnostics = parseDiagnostics(Log);
  Outcome.Succeeded = !Failed && AllPresent;
  Outcome.RawLog = std::move(Log);

  std::error_code EC;
  fs::create_directories(Cfg.ReportDir, EC);
  Outcome.LogFile =
      Cfg.ReportDir / fmt::format("build-{}-{}.log", Mode.name(), Step.Iteration);
  std::ofstream(Outcome.LogFile, std::ios::binary) << Outcome.RawLog;
  return Outcome;
}

namespace {

struct HeldLock {
  int Fd = -1;
  int Depth = 0;
};

std::mutex LockMutex;
std::map<std::string, HeldLock> &heldLocks() {
  static std::map<std::string, HeldLock> Locks;
  return Locks;
}

} // namespace

ProjectLock::ProjectLock(const fs::path &ReportDir) {
  std::error_code EC;
  fs::create_directories(ReportDir, EC);
  fs::path File = fs::absolute(ReportDir).lexically_normal() / ".cfimend.lock";
  Key = File.string();
  std::lock_guard<std::mutex> G(LockMutex);
  auto &Held = heldLocks()[Key];
  if (Held.Depth++ > 0)
    return;
  Held.Fd = open(Key.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (Held.Fd < 0 || flock(Held.Fd, LOCK_EX) != 0) {
    int Err = errno;
    if (Held.Fd >= 0)
      close(Held.Fd);
    heldLocks().erase(Key);
    throw OrchestrationError(
        fmt::format("cannot lock '{}': {}", Key, std::strerror(Err)));
  }
}

ProjectLock::~ProjectLock() {
  std::lock_guard<std::mutex> G(LockMutex);
  auto It = heldLocks().find(Key);
  if (It == heldLocks().end())
    return;
  if (--It->second.Depth == 0) {
    flock(It->second.Fd, LOCK_UN);
    close(It->second.Fd);
    heldLocks().erase(It);
  }
}

} // namespace cfimend
