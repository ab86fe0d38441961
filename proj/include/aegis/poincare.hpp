#pragma once

#include <cmath>

#include "aegis/errors.hpp"
#include "aegis/linalg.hpp"

namespace aegis {

// Numerical guards around the open unit ball. The projection is interior by
// construction, but 32-bit arithmetic can round onto the boundary, so ball
// points are clamped to kBallMaxNorm at construction and the metric rejects
// anything that slipped past kBallRejectNorm.
constexpr double kBallEps = 1e-5;
constexpr double kBallMaxNorm = 1.0 - 1e-6;
constexpr double kBallRejectNorm = 1.0 - 1e-7;

/// Clamp a vector into the ball: if |x| > kBallMaxNorm it is rescaled onto
/// that radius. Returns the scale applied (1 when untouched).
template <typename S>
S ball_clamp(S* x, int d) {
    S r = norm2(x, d);
    if (r <= S(kBallMaxNorm)) return S(1);
    S scale = S(kBallMaxNorm) / r;
    for (int i = 0; i < d; ++i) x[i] *= scale;
    return scale;
}

/// Poincare projection: phi(x) = W x / (1 + |W x| + eps), then ball-clamped.
/// Throws NonFiniteInput.
template <typename S>
Vec<S> project(const Mat<S>& w, const S* x) {
    for (int c = 0; c < w.cols; ++c)
        if (!std::isfinite(x[c])) throw Error(ErrorCode::NonFiniteInput, "project: non-finite input");
    Vec<S> z(w.rows);
    matvec(w, x, z.data());
    S r = norm2(z.data(), w.rows);
    S g = S(1) / (S(1) + r + S(kBallEps));
    for (auto& v : z) v *= g;
    ball_clamp(z.data(), w.rows);
    return z;
}

/// Hyperbolic distance on the ball:
/// arcosh(1 + 2 |u-v|^2 / ((1-|u|^2)(1-|v|^2))).
/// Inputs with norm >= kBallRejectNorm signal an upstream clamping failure
/// and raise BoundaryPoint; norms in (kBallMaxNorm, kBallRejectNorm) are
/// clamped before evaluation.
template <typename S>
S poincare_distance(Vec<S> u, Vec<S> v) {
    if (u.size() != v.size())
        throw Error(ErrorCode::DimMismatch, "distance: dimension mismatch");
    const int d = static_cast<int>(u.size());
    S nu = norm2(u.data(), d);
    S nv = norm2(v.data(), d);
    if (!(nu < S(kBallRejectNorm)) || !(nv < S(kBallRejectNorm)))
        throw Error(ErrorCode::BoundaryPoint, "distance: point at or beyond the guard radius");
    ball_clamp(u.data(), d);
    ball_clamp(v.data(), d);
    nu = norm2(u.data(), d);
    nv = norm2(v.data(), d);

    S diff2 = S(0);
    for (int i = 0; i < d; ++i) {
        S t = u[i] - v[i];
        diff2 += t * t;
    }
    S denom = (S(1) - nu * nu) * (S(1) - nv * nv);
    S arg = S(1) + S(2) * diff2 / denom;
    // arcosh via log1p keeps precision near arg = 1 (u close to v).
    S t = arg - S(1);
    return std::log1p(t + std::sqrt(t * (t + S(2))));
}

} // namespace aegis
