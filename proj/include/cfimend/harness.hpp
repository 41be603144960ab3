// Test-suite execution and baseline/CFI comparison.
//
// test_cmd is run once, untraced, from project_root to enumerate the suite.
// Every output line of the form
//
//   TEST <TAB> <test id> <TAB> <shell command>
//
// names one test; other lines are ignored. Each command is then executed by
// the harness itself under run_traced, from project_root.
#pragma once

#include "cfimend/build.hpp"
#include "cfimend/config.hpp"
#include "cfimend/trace.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace cfimend {

struct TestCase {
  std::string Id;
  std::string Command;

  bool operator==(const TestCase &) const = default;
};

struct TestResult {
  std::string TestId;
  std::string Command;
  TraceOutcome Outcome;
  bool Passed = false;
  bool TrappedCfi = false;

  static TestResult from(std::string Id, std::string Command, TraceOutcome Outcome);
};

enum class FailureClass { Pass, BaselineFailure, CfiPolicyViolation, FunctionalNonCfi };

std::string_view failureClassName(FailureClass C);

/// Test lines of a test_cmd output, in order. Duplicate ids are rejected.
std::vector<TestCase> parseTestList(std::string_view Output);

/// Runs test_cmd and parses its output. Throws HarnessError if the command
/// fails or emits no test lines.
std::vector<TestCase> enumerateTests(const ProjectConfig &Cfg);

TestResult runTest(const ProjectConfig &Cfg, const TestCase &Test);

/// Runs Tests (all of them, or only those whose id is in Only) sequentially
/// under tracing. Requires a successful build.
std::vector<TestResult> runSuite(const ProjectConfig &Cfg, const BuildOutcome &Build,
                                 const std::vector<TestCase> &Tests,
                                 const std::set<std::string> *Only = nullptr);

/// Outcome matrix: failing baseline -> BaselineFailure; CFI trap ->
/// CfiPolicyViolation; any other CFI failure -> FunctionalNonCfi; else Pass.
/// Throws ContractViolation when the test ids differ.
FailureClass classify(const TestResult &Baseline, const TestResult &Cfi);

struct SuiteDiff {
  std::map<FailureClass, int> Counts;
  std::vector<std::pair<std::string, FailureClass>> PerTest; // baseline order
  std::vector<std::string> Indeterminate;                    // in one suite only

  int total() const;
  int count(FailureClass C) const;
};

SuiteDiff diffSuites(const std::vector<TestResult> &Baseline,
                     const std::vector<TestResult> &Cfi);

} // namespace cfimend
