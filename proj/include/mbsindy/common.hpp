// Shared basics: plane vectors and the error taxonomy used across the library.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace mbsindy {

// All library errors derive from Error so callers can catch one base type.
// Subclasses separate "the caller passed something unusable" from "the data
// turned out to be unusable" from "the numerics broke down"; the CLI maps
// these onto distinct exit codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad argument values (negative horizon, mismatched sizes, out-of-range time).
class InvalidParameterError : public Error {
public:
    using Error::Error;
};

// A point family too small or too lopsided to support the moment equations.
class DegenerateFamilyError : public Error {
public:
    using Error::Error;
};

// Moment matrix condition number past the trust threshold, or residual too big.
class IllConditionedFamilyError : public Error {
public:
    using Error::Error;
};

// A field sample is missing or non-finite where a value is required.
class IncompleteDataError : public Error {
public:
    using Error::Error;
};

// Boundary curve segment with (near-)coincident endpoints.
class DegeneratePanelError : public Error {
public:
    using Error::Error;
};

// Level-set gradient vanished where a normal was requested.
class FlatLevelSetError : public Error {
public:
    using Error::Error;
};

// A required snapshot or curve is absent from the dataset.
class MissingSnapshotError : public Error {
public:
    using Error::Error;
};

// Every candidate row of a feature system was skipped; nothing to regress.
class EmptySystemError : public Error {
public:
    using Error::Error;
};

// A feature column is identically zero and cannot be normalized.
class ZeroColumnError : public Error {
public:
    using Error::Error;
};

// Matrix/vector dimensions disagree.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Unpenalized least squares on a rank-deficient system.
class SingularSystemError : public Error {
public:
    using Error::Error;
};

// No usable model: every candidate produced an empty support.
class NoModelError : public Error {
public:
    using Error::Error;
};

// Explicit time step rejected by the stability bound.
class CflError : public Error {
public:
    using Error::Error;
};

// Boundary graph folded over (slope blow-up) and stopped being single-valued.
class TopologyError : public Error {
public:
    using Error::Error;
};

// Recovered model has non-positive diffusion; forward replay is ill-posed.
class IllPosedModelError : public Error {
public:
    using Error::Error;
};

// Solver state left the representable regime (NaN, front out of domain).
class SimulationError : public Error {
public:
    using Error::Error;
};

// Filesystem / parse problems.
class IoError : public Error {
public:
    using Error::Error;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }
    Vec2& operator+=(const Vec2& o) {
        x += o.x;
        y += o.y;
        return *this;
    }

    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
    double squared_norm() const { return x * x + y * y; }

    // Counterclockwise quarter turn.
    Vec2 perp_ccw() const { return {-y, x}; }
    // Clockwise quarter turn.
    Vec2 perp_cw() const { return {y, -x}; }

    Vec2 normalized() const {
        double n = norm();
        if (n == 0.0) throw InvalidParameterError("cannot normalize a zero vector");
        return {x / n, y / n};
    }
};

inline Vec2 operator*(double s, const Vec2& v) { return {s * v.x, s * v.y}; }

inline Vec2 rotate(const Vec2& v, double angle) {
    double c = std::cos(angle), s = std::sin(angle);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

}  // namespace mbsindy
