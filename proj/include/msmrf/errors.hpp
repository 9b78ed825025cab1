#pragma once

#include <stdexcept>
#include <string>

namespace msmrf {

// Base class for every error thrown by the library; the CLI maps
// subclasses onto its exit-code vocabulary.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent configuration input.
struct ConfigError : Error {
    using Error::Error;
};

// Explicit neighbor list violates symmetry or contains self-loops.
struct TopologyError : Error {
    using Error::Error;
};

// Child groups of a coarsening step overlap or fail to cover the fine scale.
struct PartitionError : Error {
    using Error::Error;
};

// Grid dimensions disagree with the lattice.
struct ShapeError : Error {
    using Error::Error;
};

// Unreadable or non-numeric input data.
struct ParseError : Error {
    using Error::Error;
};

// Index outside the valid range of a scale.
struct BoundsError : Error {
    using Error::Error;
};

// Parent queried at the coarsest scale, or children at the finest.
struct ScaleBoundaryError : Error {
    using Error::Error;
};

// Value outside the support of the requested distribution.
struct DomainError : Error {
    using Error::Error;
};

// Distribution parameters violate positivity constraints.
struct ParameterError : Error {
    using Error::Error;
};

// Parameter estimation impossible (e.g. an empty group everywhere).
struct EstimationError : Error {
    using Error::Error;
};

// Problem too large for exact enumeration.
struct SizeError : Error {
    using Error::Error;
};

}  // namespace msmrf
