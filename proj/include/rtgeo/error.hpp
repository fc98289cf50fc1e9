#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rtgeo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string &what) : std::runtime_error(what) {}
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class ShapeError : public Error {
public:
  using Error::Error;
};

class SamplingError : public Error {
public:
  using Error::Error;
};

class DomainError : public Error {
public:
  using Error::Error;
};

class ResolutionError : public Error {
public:
  using Error::Error;
};

class DegreeError : public Error {
public:
  using Error::Error;
};

class DeterminantError : public Error {
public:
  using Error::Error;
};

class TestFunctionError : public Error {
public:
  using Error::Error;
};

class FittingError : public Error {
public:
  using Error::Error;
};

class NonIntegrableError : public Error {
public:
  using Error::Error;
};

class InversionError : public Error {
public:
  using Error::Error;
};

/// Raised by iterative procedures; carries the residual history for diagnosis.
class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string &what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}
  const std::vector<double> &history() const noexcept { return history_; }

private:
  std::vector<double> history_;
};

/// An error tagged with the pipeline stage that produced it.
class StageError : public Error {
public:
  StageError(std::string stage, const std::string &what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string &stage() const noexcept { return stage_; }

private:
  std::string stage_;
};

} // namespace rtgeo
