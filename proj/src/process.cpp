#include "cfimend/process.hpp"
#include "cfimend/error.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace cfimend {

std::string truncationMarker(std::size_t Cap) {
  return fmt::format("\n[cfimend: output truncated at {} bytes]\n", Cap);
}

ShellResult runShell(const ShellCommand &Cmd) {
  int Pipe[2];
  if (pipe2(Pipe, O_CLOEXEC) != 0)
    throw OrchestrationError(fmt::format("pipe: {}", std::strerror(errno)));

  auto Start = std::chrono::steady_clock::now();
  pid_t Pid = fork();
  if (Pid < 0) {
    close(Pipe[0]);
    close(Pipe[1]);
    throw OrchestrationError(fmt::format("fork: {}", std::strerror(errno)));
  }
  if (Pid == 0) {
    setpgid(0, 0);
    int DevNull = open("/dev/null", O_RDONLY);
    if (DevNull >= 0)
      dup2(DevNull, STDIN_FILENO);
    dup2(Pipe[1], STDOUT_FILENO);
    dup2(Pipe[1], STDERR_FILENO);
    if (!Cmd.WorkingDir.empty() && chdir(Cmd.WorkingDir.c_str()) != 0)
      _exit(126);
    for (const auto &[K, V] : Cmd.Env)
      setenv(K.c_str(), V.c_str(), 1);
    execl("/bin/sh", "sh", "-c", Cmd.Script.c_str(), static_cast<char *>(nullptr));
    _exit(127);
  }
  setpgid(Pid, Pid);
  close(Pipe[1]);

  ShellResult R;
  std::optional<std::chrono::steady_clock::time_point> Deadline;
  if (Cmd.Timeout)
    Deadline = Start + *Cmd.Timeout;

  char Buf[65536];
  for (;;) {
    int WaitMs = -1;
    if (Deadline) {
      auto Left = std::chrono::duration_cast<std::chrono::milliseconds>(
          *Deadline - std::chrono::steady_clock::now());
      if (Left.count() <= 0) {
        R.TimedOut = true;
        kill(-Pid, SIGKILL);
        break;
      }
      WaitMs = static_cast<int>(Left.count());
    }
    pollfd PFD{Pipe[0], POLLIN, 0};
    int N = poll(&PFD, 1, WaitMs);
    if (N < 0 && errno == EINTR)
      continue;
    if (N == 0)
      continue;
    ssize_t Got = read(Pipe[0], Buf, sizeof(Buf));
    if (Got < 0 && errno == EINTR)
      continue;
    if (Got <= 0)
      break;
    if (!R.Truncated) {
      std::size_t Room = Cmd.OutputCap - R.Output.size();
      if (static_cast<std::size_t>(Got) <= Room) {
        R.Output.append(Buf, static_cast<std::size_t>(Got));
      } else {
        R.Output.append(Buf, Room);
        R.Output += truncationMarker(Cmd.OutputCap);
        R.Truncated = true;
      }
    }
  }
  close(Pipe[0]);

  int Status = 0;
  while (waitpid(Pid, &Status, 0) < 0 && errno == EINTR) {
  }
  // Reap stragglers still holding the group alive after a timeout.
  if (R.TimedOut)
    kill(-Pid, SIGKILL);

  if (WIFEXITED(Status)) {
    R.ExitCode = WEXITSTATUS(Status);
  } else if (WIFSIGNALED(Status)) {
    R.Signalled = true;
    R.Signal = WTERMSIG(Status);
  }
  R.WallSeconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - Start)
                      .count();
  return R;
}

std::string shellQuote(std::string_view S) {
  if (!S.empty() && S.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
                                        "0123456789_-+=./:,@%") == std::string_view::npos)
    return std::string(S);
  std::string Out = "'";
  for (char C : S) {
    if (C == '\'')
      Out += "'\\''";
    else
      Out += C;
  }
  Out += '\'';
  return Out;
}

std::string shellJoin(const std::vector<std::string> &Args) {
  std::string Out;
  for (const auto &A : Args) {
    if (!Out.empty())
      Out += ' ';
    Out += shellQuote(A);
  }
  return Out;
}

struct Sha256::Impl {
  EVP_MD_CTX *Ctx = nullptr;
  bool Done = false;
};

Sha256::Sha256() : P(std::make_unique<Impl>()) {
  P->Ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(P->Ctx, EVP_sha256(), nullptr);
}

Sha256::~Sha256() { EVP_MD_CTX_free(P->Ctx); }

void Sha256::update(std::span<const std::byte> Data) {
  if (!P->Done)
    EVP_DigestUpdate(P->Ctx, Data.data(), Data.size());
}

void Sha256::update(std::string_view Data) {
  update(std::as_bytes(std::span(Data.data(), Data.size())));
}

std::string Sha256::finish() {
  unsigned char Md[EVP_MAX_MD_SIZE];
  unsigned Len = 0;
  EVP_DigestFinal_ex(P->Ctx, Md, &Len);
  P->Done = true;
  std::string Hex;
  Hex.reserve(Len * 2);
  for (unsigned I = 0; I < Len; ++I)
    Hex += fmt::format("{:02x}", Md[I]);
  return Hex;
}

std::string sha256Hex(std::string_view Data) {
  Sha256 H;
  H.update(Data);
  return H.finish();
}

} // namespace cfimend
