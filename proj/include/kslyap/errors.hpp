#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kslyap {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Non-finite or runaway state during time stepping.
class IntegrationBlowUp : public Error {
 public:
  IntegrationBlowUp(double time, const std::string& what)
      : Error(what + " (t = " + std::to_string(time) + ")"), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class ResolutionTooCoarse : public Error {
 public:
  using Error::Error;
};

/// Failure inside the reorthonormalization loop; carries the interval index
/// (1-based, 0 when not inside the loop).
class SpectrumError : public Error {
 public:
  SpectrumError(std::size_t interval, const std::string& what)
      : Error(what), interval_(interval) {}
  std::size_t interval() const noexcept { return interval_; }

 private:
  std::size_t interval_;
};

class NonFiniteColumn : public SpectrumError {
 public:
  using SpectrumError::SpectrumError;
};

class RankDeficient : public SpectrumError {
 public:
  using SpectrumError::SpectrumError;
};

class DegenerateDivisor : public Error {
 public:
  using Error::Error;
};

class EmptyWindow : public Error {
 public:
  using Error::Error;
};

class SingularNormalEquations : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class FingerprintMismatch : public Error {
 public:
  using Error::Error;
};

/// Malformed results file; line is 1-based.
class SchemaError : public Error {
 public:
  SchemaError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace kslyap
