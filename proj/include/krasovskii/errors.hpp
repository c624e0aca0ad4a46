#pragma once

#include <stdexcept>
#include <string>

namespace krasovskii {

/// Base class for all toolkit errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Argument dimensions violate an operation's contract.
struct DimensionError : Error {
    using Error::Error;
};

/// Evaluation requested outside a model's valid domain.
struct DomainError : Error {
    using Error::Error;
};

/// A linear or nonlinear solve failed (singular matrix, rank deficiency).
struct SolverError : Error {
    using Error::Error;
};

/// A construction does not apply to the given object.
struct NotApplicableError : Error {
    using Error::Error;
};

/// Simulation fault: divergence, domain exit, or non-finite evaluation.
struct SimulationError : Error {
    using Error::Error;
};

/// Run configuration violates the expected schema.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace krasovskii
