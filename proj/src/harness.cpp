#include "cfimend/harness.hpp"
#include "cfimend/error.hpp"
#include "cfimend/process.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <sstream>

namespace cfimend {

TestResult TestResult::from(std::string Id, std::string Command, TraceOutcome Outcome) {
  TestResult R;
  R.TestId = std::move(Id);
  R.Command = std::move(Command);
  R.Passed = Outcome.passed();
  R.TrappedCfi = Outcome.trappedCfi();
  R.Outcome = std::move(Outcome);
  return R;
}

std::string_view failureClassName(FailureClass C) {
  switch (C) {
  case FailureClass::Pass:
    return "Pass";
  case FailureClass::BaselineFailure:
    return "BaselineFailure";
  case FailureClass::CfiPolicyViolation:
    return "CfiPolicyViolation";
  case FailureClass::FunctionalNonCfi:
    return "FunctionalNonCfi";
  }
  return "?";
}

std::vector<TestCase> parseTestList(std::string_view Output) {
  std::vector<TestCase> Tests;
  std::istringstream In{std::string(Output)};
  std::string Line;
  while (std::getline(In, Line)) {
    if (!Line.empty() && Line.back() == '\r')
      Line.pop_back();
    if (Line.rfind("TEST\t", 0) != 0)
      continue;
    auto Tab = Line.find('\t', 5);
    if (Tab == std::string::npos || Tab == 5 || Tab + 1 >= Line.size())
      continue;
    TestCase T{Line.substr(5, Tab - 5), Line.substr(Tab + 1)};
    if (std::any_of(Tests.begin(), Tests.end(), [&](const auto &O) { return O.Id == T.Id; }))
      throw HarnessError("duplicate test id '" + T.Id + "'");
    Tests.push_back(std::move(T));
  }
  return Tests;
}

std::vector<TestCase> enumerateTests(const ProjectConfig &Cfg) {
  ShellCommand Cmd;
  Cmd.Script = Cfg.TestCmd;
  Cmd.WorkingDir = Cfg.ProjectRoot;
  Cmd.Timeout = std::chrono::milliseconds(Cfg.TestTimeoutSeconds * 1000);
  ShellResult R = runShell(Cmd);
  if (R.TimedOut || R.Signalled || R.ExitCode != 0)
    throw HarnessError(fmt::format("test_cmd failed (status {}): {}", R.ExitCode,
                                   R.Output.substr(0, 2000)));
  auto Tests = parseTestList(R.Output);
  if (Tests.empty())
    throw HarnessError("test_cmd emitted no TEST lines");
  return Tests;
}

TestResult runTest(const ProjectConfig &Cfg, const TestCase &Test) {
  TracedCommand Cmd;
  Cmd.Script = Test.Command;
  Cmd.WorkingDir = Cfg.ProjectRoot;
  Cmd.Timeout = std::chrono::milliseconds(Cfg.TestTimeoutSeconds * 1000);
  Cmd.TestId = Test.Id;
  return TestResult::from(Test.Id, Test.Command, runTraced(Cmd));
}

std::vector<TestResult> runSuite(const ProjectConfig &Cfg, const BuildOutcome &Build,
                                 const std::vector<TestCase> &Tests,
                                 const std::set<std::string> *Only) {
  if (!Build.Succeeded)
    throw ContractViolation("runSuite requires a successful build");
  std::vector<TestResult> Results;
  for (const auto &T : Tests)
    if (!Only || Only->count(T.Id))
      Results.push_back(runTest(Cfg, T));
  return Results;
}

FailureClass classify(const TestResult &Baseline, const TestResult &Cfi) {
  if (Baseline.TestId != Cfi.TestId)
    throw ContractViolation(
        fmt::format("classify: test ids differ ('{}' vs '{}')", Baseline.TestId, Cfi.TestId));
  if (!Baseline.Passed)
    return FailureClass::BaselineFailure;
  if (Cfi.TrappedCfi)
    return FailureClass::CfiPolicyViolation;
  if (!Cfi.Passed)
    return FailureClass::FunctionalNonCfi;
  return FailureClass::Pass;
}

int SuiteDiff::total() const {
  int N = static_cast<int>(Indeterminate.size());
  for (const auto &[C, K] : Counts)
    N += K;
  return N;
}

int SuiteDiff::count(FailureClass C) const {
  auto It = Counts.find(C);
  return It == Counts.end() ? 0 : It->second;
}

SuiteDiff diffSuites(const std::vector<TestResult> &Baseline,
                     const std::vector<TestResult> &Cfi) {
  SuiteDiff D;
  for (const auto &B : Baseline) {
    auto It = std::find_if(Cfi.begin(), Cfi.end(),
                           [&](const auto &C) { return C.TestId == B.TestId; });
    if (It == Cfi.end()) {
      D.Indeterminate.push_back(B.TestId);
      continue;
    }
    auto C = classify(B, *It);
    ++D.Counts[C];
    D.PerTest.emplace_back(B.TestId, C);
  }
  for (const auto &C : Cfi)
    if (std::none_of(Baseline.begin(), Baseline.end(),
                     [&](const auto &B) { return B.TestId == C.TestId; }))
      D.Indeterminate.push_back(C.TestId);
  return D;
}

} // namespace cfimend
