// Shell command execution with captured output, plus stream digests.
#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cfimend {

namespace fs = std::filesystem;

using EnvOverrides = std::vector<std::pair<std::string, std::string>>;

struct ShellCommand {
  std::string Script;
  fs::path WorkingDir;
  EnvOverrides Env;
  std::optional<std::chrono::milliseconds> Timeout;
  /// Output beyond this many bytes is dropped and a marker appended.
  std::size_t OutputCap = 64u << 20;
};

struct ShellResult {
  int ExitCode = 0;        // valid when !Signalled
  int Signal = 0;          // valid when Signalled
  bool Signalled = false;
  bool TimedOut = false;
  bool Truncated = false;
  std::string Output;      // stdout and stderr interleaved
  double WallSeconds = 0;
};

/// Runs Script with /bin/sh -c in its own process group. stdout and stderr
/// share one pipe so compiler and linker messages keep their order.
/// Throws OrchestrationError if the process cannot be created.
ShellResult runShell(const ShellCommand &Cmd);

/// Marker appended to captured output that hit the size cap.
std::string truncationMarker(std::size_t Cap);

/// POSIX single-quote escaping.
std::string shellQuote(std::string_view S);
std::string shellJoin(const std::vector<std::string> &Args);

/// Incremental SHA-256.
class Sha256 {
public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256 &) = delete;
  Sha256 &operator=(const Sha256 &) = delete;

  void update(std::span<const std::byte> Data);
  void update(std::string_view Data);
  /// Lowercase hex digest; the object cannot be updated afterwards.
  std::string finish();

private:
  struct Impl;
  std::unique_ptr<Impl> P;
};

std::string sha256Hex(std::string_view Data);

} // namespace cfimend
