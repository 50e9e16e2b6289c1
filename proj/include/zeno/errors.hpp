#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace zeno {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: configs, state specs, indices. Mapped to CLI exit status 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Linear-algebra or dynamics failure. Mapped to CLI exit status 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// File system failures and checksum mismatches. Mapped to CLI exit status 4.
class IoError : public Error {
 public:
  using Error::Error;
};

class InvalidConfig : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class SiteOutOfRange : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class LengthMismatch : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class InvalidIndex : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class IncompatibleRuns : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ParseError : public ConfigError {
 public:
  ParseError(const std::string& what, std::size_t position)
      : ConfigError(what + " (at position " + std::to_string(position) + ")"),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class NotHermitian : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class Defective : public NumericalError {
 public:
  explicit Defective(double condition)
      : NumericalError("matrix is numerically defective (eigenvector condition estimate " +
                       std::to_string(condition) + ")"),
        condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

class ZeroNorm : public NumericalError {
 public:
  explicit ZeroNorm(std::size_t last_valid_step)
      : NumericalError("state norm vanished after step " + std::to_string(last_valid_step)),
        last_valid_step_(last_valid_step) {}
  std::size_t last_valid_step() const { return last_valid_step_; }

 private:
  std::size_t last_valid_step_;
};

class NoSurvivingComponent : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace zeno
