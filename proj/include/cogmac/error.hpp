#pragma once

#include <stdexcept>
#include <string>

namespace cogmac {

// Invalid user-supplied configuration (bad SimConfig, empty grid, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition of an operation violated by the caller.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Training could not proceed (empty dataset, too few samples, failing fold).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergenceError : public TrainingError {
 public:
  DivergenceError(int iteration, const std::string& what)
      : TrainingError(what), iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

// Malformed file (model JSON, CSV rows). Message names the offending field path or row.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite or otherwise unusable prediction input.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace cogmac
