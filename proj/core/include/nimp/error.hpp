#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nimp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (bad magic, truncated payload, wrong record size).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Inputs that are individually well-formed but disagree with each other.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// A caller-supplied argument is outside its documented domain.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Matrix dimensions do not line up with the model.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value lies outside the codomain the operation expects.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The requested computation is infeasible at this problem size.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Invalid or incomplete experiment configuration.
class ConfigError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

/// Training produced a non-finite (or runaway) loss.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t epoch, std::size_t batch, double loss)
      : Error("training diverged at epoch " + std::to_string(epoch) + ", batch " +
              std::to_string(batch) + " (loss " + std::to_string(loss) + ")"),
        epoch_(epoch),
        batch_(batch) {}

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

}  // namespace nimp
