#pragma once

#include <stdexcept>
#include <string>

namespace citrus {

// Argument errors (bad shapes, out-of-range modes, empty lists) use
// std::invalid_argument directly. The types below cover the remaining
// failure classes so callers can tell them apart.

/// Input data violates a structural invariant (asymmetric adjacency, ...).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-convergence or a non-finite intermediate value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Random generation could not satisfy its constraint.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Degenerate input for an analysis quantity (empty spectrum, zero energy).
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed text input (CSV, config, checkpoint).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace citrus
