#pragma once

#include <stdexcept>
#include <string>

namespace finsler {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Point lies outside the model's chart domain.
struct OutOfChartError : Error {
    using Error::Error;
};

/// A direction-dependent quantity was requested at y = 0.
struct DegenerateDirectionError : Error {
    using Error::Error;
};

/// Fundamental tensor failed the positive-definiteness check.
struct NotPositiveDefiniteError : Error {
    using Error::Error;
};

/// An iterative solve did not reach its tolerance.
struct NoConvergenceError : Error {
    using Error::Error;
};

/// A geodesic left the chart during integration.
struct GeodesicEscapeError : Error {
    using Error::Error;
};

/// Requested polar radius lies past the cut locus.
struct CutLocusError : Error {
    using Error::Error;
};

/// Heat step produced a non-positive value from positive data.
struct StabilityFailureError : Error {
    using Error::Error;
};

/// Generalized eigensolve failed (non-quadratic form or breakdown).
struct EigenFailureError : Error {
    using Error::Error;
};

/// Field does not satisfy the declared sub/supersolution side.
struct SideMismatchError : Error {
    using Error::Error;
};

/// Weighted Laplacian region contains too few usable nodes.
struct DegenerateRegionError : Error {
    using Error::Error;
};

struct InvalidArgumentError : Error {
    using Error::Error;
};

}  // namespace finsler
