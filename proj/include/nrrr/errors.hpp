#pragma once

#include <stdexcept>

namespace nrrr {

/// Shapes or ranks that do not fit together.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Points outside a basis domain, reversed intervals, degenerate grids.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Factorizations that cannot proceed (not p.d., zero SSE in BIC, ...).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input files (CSV rows, fit artifacts).
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid user configuration (ranks, tuning values, flags).
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

}  // namespace nrrr
