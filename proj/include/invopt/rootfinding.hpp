#pragma once

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace invopt {

// v^3 + p v + q = 0
struct DepressedCubic {
    double p = 0.0;
    double q = 0.0;
};

struct CubicDiscriminant {
    double delta = 0.0;
};

struct QuadraticRoots {
    double plus = 0.0;
    double minus = 0.0;
};

inline CubicDiscriminant discriminant_of(DepressedCubic c) noexcept {
    return {4.0 * c.p * c.p * c.p + 27.0 * c.q * c.q};
}

inline double cardano_unique_real_root(DepressedCubic c) {
    const double p = c.p;
    const double q = c.q;
    const double delta = discriminant_of(c).delta;
    // Relative to the size of the two terms that cancel in delta.
    const double tol = 1e-12 * std::max(4.0 * std::abs(p * p * p), 27.0 * q * q);
    if (delta < -tol) {
        throw Error(ErrorKind::NonUniqueRealRoot,
                    "cubic has three real roots (p=" + std::to_string(p) +
                        ", q=" + std::to_string(q) + ")");
    }

    // Inner radical q^2/4 + p^3/27 equals delta/108; clamp the near-double-root band.
    const double s = delta > tol ? std::sqrt(q * q / 4.0 + p * p * p / 27.0) : 0.0;
    // Pick the cube-root argument of larger magnitude; the partner follows from
    // the product of the two cube roots, which is -p/3.
    const double t = q > 0.0 ? -q / 2.0 - s : (q < 0.0 ? -q / 2.0 + s : s);
    const double a = std::cbrt(t);
    double v = a != 0.0 ? a - p / (3.0 * a) : 0.0;

    // One Newton polish; skipped where the derivative degenerates.
    const double f = (v * v + p) * v + q;
    const double df = 3.0 * v * v + p;
    if (std::abs(df) > 1e-8 * std::max(1.0, std::abs(p)) && f != 0.0) {
        const double w = v - f / df;
        if (std::abs((w * w + p) * w + q) < std::abs(f)) v = w;
    }
    return v;
}

// Roots of v^2 - beta v - c = 0 with c >= 0. The larger-magnitude root is formed
// directly; the other comes from the product -c, so nothing cancels.
inline QuadraticRoots stable_quadratic_roots(double beta, double c) {
    if (!(c >= 0.0)) throw Error(ErrorKind::NegativeTheta, "constant term c < 0");
    const double disc = std::sqrt(beta * beta + 4.0 * c);
    QuadraticRoots r;
    if (beta >= 0.0) {
        r.plus = (beta + disc) / 2.0;
        r.minus = r.plus != 0.0 ? -c / r.plus : 0.0;
    } else {
        r.minus = (beta - disc) / 2.0;
        r.plus = -c / r.minus;
    }
    return r;
}

} // namespace invopt
