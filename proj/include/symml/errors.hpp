#pragma once

#include <stdexcept>
#include <string>

namespace symml {

// Dimension or layout mismatch between a model and its inputs.
class ShapeError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or out-of-range input data (files, pixels, labels).
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// An operation was called outside its domain (e.g. a probe on a model with biases).
class PreconditionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
public:
  DivergenceError(int epoch, const std::string& what)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

private:
  int epoch_;
};

}  // namespace symml
