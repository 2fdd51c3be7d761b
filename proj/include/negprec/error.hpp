#pragma once

#include <stdexcept>
#include <string>

namespace negprec {

/// Malformed or inconsistent input data: missing files, schema violations,
/// label algebra violations, unusable corpora.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite losses or gradients, divergence during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameter tensors whose shapes disagree with the architecture.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Bad configuration values or command-line usage.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace negprec
