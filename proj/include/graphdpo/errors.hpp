#pragma once

#include <stdexcept>
#include <string>

namespace graphdpo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments: empty inputs, out-of-range indices, length mismatches.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Bad hyperparameters (beta <= 0, inverted schedules, ...).
class InvalidConfig : public Error {
 public:
  using Error::Error;
};

/// The supplied preference edges contain a directed cycle.
class CyclicPreference : public Error {
 public:
  using Error::Error;
};

/// The transitive closure of an edge list cannot be expressed as ordered
/// equivalence classes without adding or dropping comparisons.
class NonLayerable : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class Divergence : public Error {
 public:
  using Error::Error;
};

}  // namespace graphdpo
