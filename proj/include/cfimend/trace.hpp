// Process tracing and trap capture (Linux x86_64).
#pragma once

#include "cfimend/process.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cfimend {

using Address = std::uint64_t;

enum class TrapSignal { IllegalInstruction, BreakpointTrap };

std::string_view trapSignalName(TrapSignal S);

/// General-purpose register snapshot taken at the trap stop.
struct Registers {
  Address Rip = 0;
  Address Rsp = 0;
  Address Rbp = 0;
  std::uint64_t Rax = 0, Rbx = 0, Rcx = 0, Rdx = 0, Rsi = 0, Rdi = 0;
  std::uint64_t R8 = 0, R9 = 0, R10 = 0, R11 = 0, R12 = 0, R13 = 0, R14 = 0, R15 = 0;
  std::uint64_t Eflags = 0;
};

/// One line of /proc/<pid>/maps.
struct MemoryMapping {
  Address Start = 0;
  Address End = 0;
  std::uint64_t FileOffset = 0;
  std::string Perms;
  std::string Path;

  bool contains(Address A) const { return A >= Start && A < End; }
};

std::vector<MemoryMapping> parseProcMaps(std::string_view Text);

struct TrapEvent {
  TrapSignal Signal = TrapSignal::IllegalInstruction;
  Address RawPc = 0;
  Address FaultPc = 0;
  std::vector<Address> ReturnAddresses; // at most two
  Registers Regs;
  std::string Binary;                   // image containing FaultPc
  std::optional<std::string> TestId;
  std::vector<MemoryMapping> Mappings;  // process map at trap time
};

struct TraceOutcome {
  enum class Kind { Exited, Trapped, TimedOut, Signalled };

  Kind OutcomeKind = Kind::Exited;
  int ExitStatus = 0;                // Exited
  int Signal = 0;                    // Signalled
  std::optional<TrapEvent> Trap;     // Trapped
  std::string StdoutDigest;
  std::string StderrDigest;
  double WallSeconds = 0;

  bool trappedCfi() const {
    return OutcomeKind == Kind::Trapped && Trap &&
           Trap->Signal == TrapSignal::IllegalInstruction;
  }
  bool passed() const { return OutcomeKind == Kind::Exited && ExitStatus == 0; }
};

std::string describe(const TraceOutcome &O);

/// Fault address from the architectural PC: SIGILL reports the faulting
/// instruction itself, SIGTRAP reports the byte after the one-byte int3.
constexpr Address correctPc(TrapSignal S, Address RawPc) {
  return S == TrapSignal::BreakpointTrap ? RawPc - 1 : RawPc;
}

/// Reads one 8-byte word of tracee memory; nullopt on failure.
using MemoryReader = std::function<std::optional<std::uint64_t>(Address)>;

/// Frame-pointer walk, at most two return addresses:
///   ret0 = [FP0 + 8]; FP1 = [FP0]; ret1 = [FP1 + 8] only if FP1 > FP0.
/// Any failed read or non-increasing frame pointer ends the chain.
std::vector<Address> unwindFrames(const Registers &Regs, const MemoryReader &Read);

struct TracedCommand {
  std::string Script; // run with /bin/sh -c
  fs::path WorkingDir;
  EnvOverrides Env;
  std::chrono::milliseconds Timeout{120000};
  std::optional<std::string> TestId;
};

/// Runs Cmd under ptrace, following every descendant. SIGILL and SIGTRAP
/// stops are captured before the signal is delivered; the tracee tree is
/// then killed, never resumed. Throws OrchestrationError if the tracee
/// cannot be started or attached.
TraceOutcome runTraced(const TracedCommand &Cmd);

} // namespace cfimend
