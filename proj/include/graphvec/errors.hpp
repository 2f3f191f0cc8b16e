#pragma once

#include <stdexcept>
#include <string>

namespace graphvec {

// Error taxonomy used across the library.  Every subclass carries a message
// naming the offending file / parameter / operation so CLI diagnostics stay
// actionable.

// Unreadable or missing input file.
struct IngestError : std::runtime_error {
  explicit IngestError(const std::string& msg) : std::runtime_error(msg) {}
};

// Input file exists but violates its format contract.
struct MalformedInputError : std::runtime_error {
  explicit MalformedInputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller passed an out-of-range or inconsistent parameter.
struct ParameterError : std::invalid_argument {
  explicit ParameterError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Input is structurally valid but degenerate for the requested operation
// (e.g. all points coincide, an augmentation would empty a graph).
struct DegenerateInputError : std::runtime_error {
  explicit DegenerateInputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric breakdown: NaN/Inf appeared, or a matrix failed a numeric precondition.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Matrix dimensions incompatible with the requested operation.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse: a documented precondition between components was violated.
struct ContractError : std::logic_error {
  explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace graphvec
