#ifndef CAIN_ERRORS_HPP_
#define CAIN_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace cain {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape / dimension mismatches. Message names the offending shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values (bad stride, missing key, inconsistent stack).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Out-of-range id in an embedding lookup or dataset record.
class IndexError : public Error {
 public:
  using Error::Error;
};

// Malformed dataset file. Carries line number context in the message.
class DataFormatError : public Error {
 public:
  using Error::Error;
};

// Metric undefined for the given input (e.g. single-class AUC).
class MetricError : public Error {
 public:
  using Error::Error;
};

// Checkpoint integrity or config-drift failures.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

// API misuse (non-scalar loss, empty batch, eps out of range).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Non-finite value detected during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace cain

#endif  // CAIN_ERRORS_HPP_
