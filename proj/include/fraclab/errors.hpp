#pragma once

#include <stdexcept>
#include <string>

namespace fraclab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or parameters (p <= 1, s outside (0,1), n too small, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed geometry: overlapping cells, a node on the boundary, mismatched grids.
class GeometryError : public Error {
public:
    using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Pointwise evaluation requested in the singular regime p < 2, s >= 2(p-1)/p.
class SingularCaseError : public Error {
public:
    using Error::Error;
};

/// A far-field integral diverges for the declared growth of a field.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// A limit that should exist did not settle (epsilon series, quadrature).
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf or a stalled iteration.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace fraclab
