#pragma once

#include <stdexcept>
#include <string>

namespace condgen {

// Malformed or unreadable input files (CSV, checkpoints, JSON config).
struct LoadError : std::runtime_error {
  explicit LoadError(const std::string& what) : std::runtime_error(what) {}
};

// Configuration field failed validation; message names the field.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// An iterative solver exhausted its budget; message reports the residual.
struct ConvergenceError : std::runtime_error {
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

// A caller broke an API contract (e.g. a pair not present in the edge set).
struct ContractViolation : std::logic_error {
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// Training produced non-finite values; message carries the diagnostic.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace condgen
