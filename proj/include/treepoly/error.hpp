#pragma once

#include <stdexcept>
#include <string>

namespace treepoly {

/// Base class for every error raised by the library. The exit code is the
/// process status the CLI reports for this category.
class Error : public std::runtime_error {
 public:
  Error(const std::string& what, int exit_code)
      : std::runtime_error(what), exit_code_(exit_code) {}

  int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

/// Bad parameters, bad spec JSON, unreadable config.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what, 2) {}
};

/// Requested depth exceeds the configured traversal/enumeration cap.
class DepthLimitError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// The root vertex carries no weight.
class RootVertexError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// A numeric procedure could not produce a trustworthy value.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(what, 3) {}
};

/// sigma^2 = 0, so the Seneta-Heyde constant is undefined.
class DegenerateDisorderError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// The derivative-martingale normalizer of a prob_inf estimate is <= 0.
class NonpositiveNormalizerError : public NumericError {
 public:
  NonpositiveNormalizerError(const std::string& what, double normalizer)
      : NumericError(what), normalizer_(normalizer) {}
  double normalizer() const noexcept { return normalizer_; }

 private:
  double normalizer_;
};

/// Operation called for a disorder regime it is not defined for.
class RegimeError : public Error {
 public:
  explicit RegimeError(const std::string& what) : Error(what, 4) {}
};

}  // namespace treepoly
