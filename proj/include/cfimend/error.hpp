// Exception hierarchy shared by all pipeline stages.
#pragma once

#include <stdexcept>
#include <string>

namespace cfimend {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration text. Line and column are 1-based.
class ConfigParseError : public Error {
public:
  ConfigParseError(const std::string &What, int Line, int Column)
      : Error(What), Line(Line), Column(Column) {}
  int line() const { return Line; }
  int column() const { return Column; }

private:
  int Line;
  int Column;
};

class ConfigValidationError : public Error {
public:
  using Error::Error;
};

/// A precondition of an operation was violated by the caller.
class ContractViolation : public Error {
public:
  using Error::Error;
};

/// A command could not be launched, traced or supervised.
class OrchestrationError : public Error {
public:
  using Error::Error;
};

class RepairError : public Error {
public:
  using Error::Error;
};

/// The source file changed since its definition site was located.
class StaleLocationError : public RepairError {
public:
  using RepairError::RepairError;
};

class HarnessError : public Error {
public:
  using Error::Error;
};

class ResolutionError : public Error {
public:
  using Error::Error;
};

class EmissionError : public Error {
public:
  using Error::Error;
};

} // namespace cfimend
