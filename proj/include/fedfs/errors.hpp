#pragma once

#include <stdexcept>
#include <string>

namespace fedfs {

/// Tensor/model shape disagreement, including out-of-range labels.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Operation received an empty batch or dataset where at least one row is required.
struct EmptyInputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Malformed binary input (bad magic number, non-byte labels, ...).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Two inputs that must agree (e.g. image vs. label counts) do not.
struct ConsistencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value or combination.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite value encountered during training; the round must be aborted.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Mathematically degenerate input (all-zero weights, non-dominant probe diagonal).
struct DegeneracyError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

}  // namespace fedfs
