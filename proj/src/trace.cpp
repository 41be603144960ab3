#include "cfimend/trace.hpp"
#include "cfimend/error.hpp"

#include <fmt/format.h>

#include <atomic>
#include <cerrno>
#include <condition_variable>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <fstream>
#include <mutex>
#include <poll.h>
#include <set>
#include <sstream>
#include <sys/ptrace.h>
#include <sys/user.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

namespace cfimend {

std::string_view trapSignalName(TrapSignal S) {
  return S == TrapSignal::IllegalInstruction ? "IllegalInstruction" : "BreakpointTrap";
}

std::string describe(const TraceOutcome &O) {
  switch (O.OutcomeKind) {
  case TraceOutcome::Kind::Exited:
    return fmt::format("Exited({})", O.ExitStatus);
  case TraceOutcome::Kind::Trapped:
    return O.Trap ? fmt::format("Trapped({}, 0x{:x})", trapSignalName(O.Trap->Signal),
                                O.Trap->FaultPc)
                  : "Trapped";
  case TraceOutcome::Kind::TimedOut:
    return "TimedOut";
  case TraceOutcome::Kind::Signalled:
    return fmt::format("Signalled({})", O.Signal);
  }
  return "?";
}

std::vector<MemoryMapping> parseProcMaps(std::string_view Text) {
  std::vector<MemoryMapping> Out;
  std::istringstream In{std::string(Text)};
  std::string Line;
  while (std::getline(In, Line)) {
    std::istringstream LS(Line);
    std::string Range, Perms, Offset, Dev, Inode;
    if (!(LS >> Range >> Perms >> Offset >> Dev >> Inode))
      continue;
    auto Dash = Range.find('-');
    if (Dash == std::string::npos)
      continue;
    MemoryMapping M;
    try {
      M.Start = std::stoull(Range.substr(0, Dash), nullptr, 16);
      M.End = std::stoull(Range.substr(Dash + 1), nullptr, 16);
      M.FileOffset = std::stoull(Offset, nullptr, 16);
    } catch (const std::exception &) {
      continue;
    }
    M.Perms = Perms;
    std::string Rest;
    std::getline(LS, Rest);
    auto First = Rest.find_first_not_of(' ');
    M.Path = First == std::string::npos ? "" : Rest.substr(First);
    Out.push_back(std::move(M));
  }
  return Out;
}

std::vector<Address> unwindFrames(const Registers &Regs, const MemoryReader &Read) {
  std::vector<Address> Chain;
  Address Fp0 = Regs.Rbp;
  auto Ret0 = Read(Fp0 + 8);
  if (!Ret0)
    return Chain;
  Chain.push_back(*Ret0);
  auto Fp1 = Read(Fp0);
  if (!Fp1 || *Fp1 <= Fp0)
    return Chain;
  auto Ret1 = Read(*Fp1 + 8);
  if (!Ret1)
    return Chain;
  Chain.push_back(*Ret1);
  return Chain;
}

namespace {

Registers fromUser(const user_regs_struct &U) {
  Registers R;
  R.Rip = U.rip;
  R.Rsp = U.rsp;
  R.Rbp = U.rbp;
  R.Rax = U.rax;
  R.Rbx = U.rbx;
  R.Rcx = U.rcx;
  R.Rdx = U.rdx;
  R.Rsi = U.rsi;
  R.Rdi = U.rdi;
  R.R8 = U.r8;
  R.R9 = U.r9;
  R.R10 = U.r10;
  R.R11 = U.r11;
  R.R12 = U.r12;
  R.R13 = U.r13;
  R.R14 = U.r14;
  R.R15 = U.r15;
  R.Eflags = U.eflags;
  return R;
}

std::optional<std::uint64_t> peekWord(pid_t Pid, Address A) {
  errno = 0;
  long V = ptrace(PTRACE_PEEKDATA, Pid, reinterpret_cast<void *>(A), nullptr);
  if (errno != 0)
    return std::nullopt;
  return static_cast<std::uint64_t>(V);
}

std::string readText(const std::string &Path) {
  std::ifstream In(Path);
  std::stringstream SS;
  SS << In.rdbuf();
  return SS.str();
}

// Digests one output pipe on its own thread.
class StreamDigest {
public:
  explicit StreamDigest(int Fd) : Fd(Fd), Worker([this] { run(); }) {}
  ~StreamDigest() {
    finish();
  }

  std::string finish() {
    Stop = true;
    if (Worker.joinable())
      Worker.join();
    if (Fd >= 0) {
      close(Fd);
      Fd = -1;
    }
    if (Digest.empty())
      Digest = Hash.finish();
    return Digest;
  }

private:
  void run() {
    char Buf[65536];
    int IdleRounds = 0;
    for (;;) {
      pollfd P{Fd, POLLIN, 0};
      int N = poll(&P, 1, 50);
      if (N < 0 && errno == EINTR)
        continue;
      if (N == 0) {
        // Escaped descendants may hold the pipe open; give up once the
        // tracer has finished and the pipe stays quiet.
        if (Stop && ++IdleRounds > 4)
          return;
        continue;
      }
      IdleRounds = 0;
      ssize_t Got = read(Fd, Buf, sizeof(Buf));
      if (Got < 0 && errno == EINTR)
        continue;
      if (Got <= 0)
        return;
      Hash.update(std::string_view(Buf, static_cast<std::size_t>(Got)));
    }
  }

  int Fd;
  std::atomic<bool> Stop{false};
  Sha256 Hash;
  std::string Digest;
  std::thread Worker;
};

} // namespace

TraceOutcome runTraced(const TracedCommand &Cmd) {
  int Out[2], Err[2];
  if (pipe2(Out, O_CLOEXEC) != 0)
    throw OrchestrationError(fmt::format("pipe: {}", std::strerror(errno)));
  if (pipe2(Err, O_CLOEXEC) != 0) {
    close(Out[0]);
    close(Out[1]);
    throw OrchestrationError(fmt::format("pipe: {}", std::strerror(errno)));
  }

  auto Start = std::chrono::steady_clock::now();
  pid_t Root = fork();
  if (Root < 0)
    throw OrchestrationError(fmt::format("fork: {}", std::strerror(errno)));
  if (Root == 0) {
    setpgid(0, 0);
    int DevNull = open("/dev/null", O_RDONLY);
    if (DevNull >= 0)
      dup2(DevNull, STDIN_FILENO);
    dup2(Out[1], STDOUT_FILENO);
    dup2(Err[1], STDERR_FILENO);
    if (!Cmd.WorkingDir.empty() && chdir(Cmd.WorkingDir.c_str()) != 0)
      _exit(126);
    for (const auto &[K, V] : Cmd.Env)
      setenv(K.c_str(), V.c_str(), 1);
    if (ptrace(PTRACE_TRACEME, 0, nullptr, nullptr) != 0)
      _exit(125);
    raise(SIGSTOP);
    execl("/bin/sh", "sh", "-c", Cmd.Script.c_str(), static_cast<char *>(nullptr));
    _exit(127);
  }
  setpgid(Root, Root);
  close(Out[1]);
  close(Err[1]);
  StreamDigest StdoutHash(Out[0]);
  StreamDigest StderrHash(Err[0]);

  constexpr int WaitFlags = __WALL | __WNOTHREAD;
  int Status = 0;
  while (waitpid(Root, &Status, WaitFlags) < 0 && errno == EINTR) {
  }
  if (!WIFSTOPPED(Status) || WSTOPSIG(Status) != SIGSTOP) {
    kill(-Root, SIGKILL);
    throw OrchestrationError("could not attach tracer to command: " + Cmd.Script);
  }
  long Options = PTRACE_O_TRACEFORK | PTRACE_O_TRACEVFORK | PTRACE_O_TRACECLONE |
                 PTRACE_O_TRACEEXEC | PTRACE_O_EXITKILL;
  if (ptrace(PTRACE_SETOPTIONS, Root, nullptr, reinterpret_cast<void *>(Options)) != 0) {
    kill(-Root, SIGKILL);
    throw OrchestrationError(
        fmt::format("PTRACE_SETOPTIONS failed: {}", std::strerror(errno)));
  }

  std::mutex M;
  std::condition_variable CV;
  bool Done = false;
  std::atomic<bool> TimedOut{false};
  std::set<pid_t> Live{Root};
  std::set<pid_t> Started{Root};

  auto KillAll = [&] {
    kill(-Root, SIGKILL);
    for (pid_t P : Live)
      kill(P, SIGKILL);
  };

  std::thread Watchdog([&] {
    std::unique_lock<std::mutex> L(M);
    if (!CV.wait_for(L, Cmd.Timeout, [&] { return Done; })) {
      TimedOut = true;
      KillAll();
    }
  });

  TraceOutcome Result;
  bool Trapped = false;
  bool RootDone = false;
  ptrace(PTRACE_CONT, Root, nullptr, nullptr);

  for (;;) {
    pid_t Pid = waitpid(-1, &Status, WaitFlags);
    if (Pid < 0) {
      if (errno == EINTR)
        continue;
      break; // ECHILD: every tracee is gone
    }
    std::unique_lock<std::mutex> L(M);
    if (WIFEXITED(Status) || WIFSIGNALED(Status)) {
      Live.erase(Pid);
      if (Pid == Root) {
        RootDone = true;
        if (!Trapped) {
          if (WIFEXITED(Status)) {
            Result.OutcomeKind = TraceOutcome::Kind::Exited;
            Result.ExitStatus = WEXITSTATUS(Status);
          } else {
            Result.OutcomeKind = TraceOutcome::Kind::Signalled;
            Result.Signal = WTERMSIG(Status);
          }
        }
      }
      continue;
    }
    if (!WIFSTOPPED(Status))
      continue;

    Live.insert(Pid);
    int Sig = WSTOPSIG(Status);
    int Event = Status >> 16;
    if (Trapped) {
      kill(Pid, SIGKILL);
      continue;
    }
    if (Event != 0) {
      if (Event == PTRACE_EVENT_FORK || Event == PTRACE_EVENT_VFORK ||
          Event == PTRACE_EVENT_CLONE) {
        unsigned long Child = 0;
        if (ptrace(PTRACE_GETEVENTMSG, Pid, nullptr, &Child) == 0)
          Live.insert(static_cast<pid_t>(Child));
      }
      ptrace(PTRACE_CONT, Pid, nullptr, nullptr);
      continue;
    }
    if (Sig == SIGSTOP && Started.insert(Pid).second) {
      // Initial stop of an auto-attached child.
      ptrace(PTRACE_CONT, Pid, nullptr, nullptr);
      continue;
    }

    siginfo_t Info{};
    bool HaveInfo = ptrace(PTRACE_GETSIGINFO, Pid, nullptr, &Info) == 0;
    if (!HaveInfo) {
      // Group-stop: no signal to deliver.
      ptrace(PTRACE_CONT, Pid, nullptr, nullptr);
      continue;
    }

    bool IsIll = Sig == SIGILL;
    bool IsBreakpoint = Sig == SIGTRAP && Info.si_code > 0; // kernel-generated
    if (IsIll || IsBreakpoint) {
      user_regs_struct U{};
      if (ptrace(PTRACE_GETREGS, Pid, nullptr, &U) == 0) {
        TrapEvent E;
        E.Signal = IsIll ? TrapSignal::IllegalInstruction : TrapSignal::BreakpointTrap;
        E.Regs = fromUser(U);
        E.RawPc = E.Regs.Rip;
        E.FaultPc = correctPc(E.Signal, E.RawPc);
        E.ReturnAddresses =
            unwindFrames(E.Regs, [Pid](Address A) { return peekWord(Pid, A); });
        E.Mappings = parseProcMaps(readText(fmt::format("/proc/{}/maps", Pid)));
        for (const auto &Map : E.Mappings)
          if (Map.contains(E.FaultPc) && !Map.Path.empty()) {
            E.Binary = Map.Path;
            break;
          }
        if (E.Binary.empty()) {
          char Buf[4096];
          ssize_t N = readlink(fmt::format("/proc/{}/exe", Pid).c_str(), Buf, sizeof(Buf));
          if (N > 0)
            E.Binary.assign(Buf, static_cast<std::size_t>(N));
        }
        E.TestId = Cmd.TestId;
        Result.OutcomeKind = TraceOutcome::Kind::Trapped;
        Result.Trap = std::move(E);
        Trapped = true;
        KillAll();
        continue;
      }
    }
    ptrace(PTRACE_CONT, Pid, nullptr, reinterpret_cast<void *>(static_cast<long>(Sig)));
  }

  {
    std::lock_guard<std::mutex> L(M);
    Done = true;
  }
  CV.notify_all();
  Watchdog.join();

  if (TimedOut && !Trapped)
    Result.OutcomeKind = TraceOutcome::Kind::TimedOut;
  else if (!RootDone && !Trapped)
    Result.OutcomeKind = TraceOutcome::Kind::Signalled;

  Result.StdoutDigest = StdoutHash.finish();
  Result.StderrDigest = StderrHash.finish();
  Result.WallSeconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - Start).count();
  return Result;
}

} // namespace cfimend
