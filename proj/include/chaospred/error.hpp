#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace chaospred {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied value violates an operation's precondition. `field()`
/// names the offending parameter so front ends can report it verbatim.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error("invalid " + field + ": " + what), field_(std::move(field)) {}

  [[nodiscard]] const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A generated orbit left the bounded region (non-finite or |state| > 1e6).
class DivergenceError : public Error {
 public:
  explicit DivergenceError(std::size_t step)
      : Error("state diverged at step " + std::to_string(step)), step_(step) {}

  [[nodiscard]] std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Numerical failure inside a computation whose inputs were valid.
class NumericalError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool ok, const char* field, const std::string& what) {
  if (!ok) throw ValidationError(field, what);
}

}  // namespace detail

}  // namespace chaospred
