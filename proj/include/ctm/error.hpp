#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ctm {

/// Coarse error category; the CLI maps it onto its exit status.
enum class ErrorKind : std::uint8_t { Config, Data, Runtime };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Parameter outside its documented domain (thresholds, rates, sizes).
class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(ErrorKind::Config, what) {}
};

/// Malformed or unusable input data: CSV cells, dimensions, empty sets.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

/// A streaming invariant was broken: non-finite score, p-value out of range,
/// fold streams out of sync.
class StreamError : public Error {
 public:
  explicit StreamError(const std::string& what, std::uint64_t index = 0)
      : Error(ErrorKind::Runtime, what), index_(index) {}
  /// 1-based position in the offending stream, 0 when not applicable.
  std::uint64_t index() const noexcept { return index_; }

 private:
  std::uint64_t index_;
};

/// Numerical failure: no bracketing sign change, non-finite intermediate.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::Runtime, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

}  // namespace ctm
