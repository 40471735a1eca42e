#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bdp {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  success = 0,
  failure = 1,
  config = 2,
  numerical = 3,
  cap_exceeded = 4,
};

/// Base of every error thrown by the library. Each subclass maps onto one
/// exit code so the CLI can translate exceptions without string matching.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ExitCode code = ExitCode::failure)
      : std::runtime_error(what), code_(code) {}

  ExitCode exit_code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what, ExitCode::config) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(what, ExitCode::numerical) {}
};

class InvalidKernel : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class InvalidState : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class InvalidThresholds : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ProfileOverflow : public NumericalError {
 public:
  ProfileOverflow(const std::string& what, std::int64_t index)
      : NumericalError(what), index_(index) {}
  std::int64_t index() const noexcept { return index_; }

 private:
  std::int64_t index_;
};

/// Requested mass exceeds the critical mass; the caller should work at z_s.
class SupercriticalMass : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DivergentReference : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A jump was requested whose preconditions fail. Reaching this from the
/// simulator means the propensity bookkeeping is corrupt.
class InfeasibleJump : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IntegrationFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class StiffnessError : public IntegrationFailure {
 public:
  using IntegrationFailure::IntegrationFailure;
};

class TruncationInadequate : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ReducibleChain : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InternalInconsistency : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what, ExitCode::failure) {}
};

class StateSpaceTooLarge : public Error {
 public:
  StateSpaceTooLarge(const std::string& what, double estimated_states)
      : Error(what, ExitCode::cap_exceeded), estimate_(estimated_states) {}
  double estimated_states() const noexcept { return estimate_; }

 private:
  double estimate_;
};

}  // namespace bdp
