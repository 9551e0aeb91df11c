#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "clf_laws.hpp"

namespace invopt {

// Nonnegative real or an explicit +inf. The infinite state is a flag, so an
// overflowed double is never mistaken for "infinite penalty".
class ExtendedReal {
public:
    constexpr ExtendedReal() = default;
    constexpr explicit ExtendedReal(double v) : value_(v) {}

    static constexpr ExtendedReal infinity() {
        ExtendedReal e;
        e.infinite_ = true;
        return e;
    }

    constexpr bool is_infinite() const noexcept { return infinite_; }
    constexpr bool is_finite() const noexcept { return !infinite_; }
    // Finite payload; +inf as a double when infinite.
    double value() const noexcept {
        return infinite_ ? std::numeric_limits<double>::infinity() : value_;
    }

    friend constexpr ExtendedReal operator+(ExtendedReal a, ExtendedReal b) {
        if (a.infinite_ || b.infinite_) return infinity();
        return ExtendedReal(a.value_ + b.value_);
    }
    ExtendedReal& operator+=(ExtendedReal o) { return *this = *this + o; }

    // Weighting by a duration: an infinite sample over zero time contributes nothing.
    friend constexpr ExtendedReal operator*(double w, ExtendedReal a) {
        if (a.infinite_) return w > 0.0 ? infinity() : ExtendedReal(0.0);
        return ExtendedReal(w * a.value_);
    }

    friend constexpr bool operator==(const ExtendedReal&, const ExtendedReal&) = default;

    std::string str() const;

private:
    double value_ = 0.0;
    bool infinite_ = false;
};

inline std::string ExtendedReal::str() const {
    if (infinite_) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value_);
    return buf;
}

struct CostSample {
    double state_penalty = 0.0;
    ExtendedReal control_penalty;
    ExtendedReal integrand;
    double residual = 0.0;
};

struct CostLedger {
    ExtendedReal accumulated;
    double theoretical_min = 0.0;
    double residual_integral = 0.0;
    double horizon = 0.0;
    double tail_V = 0.0;
    double initial_V = 0.0;
    double m = 2.0;

    bool valid() const noexcept { return accumulated.is_finite(); }
    // 2m(V(0) - V(T)): what the finite horizon can collect at best.
    double collectable() const noexcept { return 2.0 * m * (initial_V - tail_V); }
    double uncollected_tail() const noexcept { return 2.0 * m * tail_V; }
    double optimality_ratio() const noexcept {
        const double d = collectable();
        return d > 0.0 ? accumulated.value() / d : std::numeric_limits<double>::quiet_NaN();
    }
};

namespace detail {

// num / inv_weight with 0/0 -> 0 and x/0 -> +inf.
inline ExtendedReal guarded_ratio(double num, double inv_weight) {
    if (num == 0.0) return ExtendedReal(0.0);
    if (inv_weight == 0.0) return ExtendedReal::infinity();
    return ExtendedReal(num / inv_weight);
}

inline double guarded_ratio_finite(double num, double inv_weight) {
    if (num == 0.0) return 0.0;
    if (inv_weight == 0.0) return std::numeric_limits<double>::infinity();
    return num / inv_weight;
}

} // namespace detail

inline double inv_weight_c(const ClfReadout& r, const ControllerSpec& s) {
    require_gain(s.m);
    const double b = std::abs(r.beta) / (s.m * s.m);
    return s.m * s.m * (std::abs(r.phi) + two_sqrt3_over_9 * b * std::sqrt(b) + alpha_eval(s.alpha, r.V));
}

inline double state_penalty_c(const ClfReadout& r, const ControllerSpec& s) {
    const double ri = inv_weight_c(r, s);
    return s.m * (s.m - 2.0) * ri - 2.0 * s.m * (r.phi - ri);
}

inline double inv_weight_q(const ClfReadout& r, const ControllerSpec& s) {
    require_gain(s.m);
    return s.m * theta_of(r, s.alpha);
}

inline double state_penalty_q(const ClfReadout& r, const ControllerSpec& s) {
    const double ri = inv_weight_q(r, s);
    return -2.0 * s.m * (r.phi - ri) + s.m * (s.m - 2.0) * ri;
}


inline ExtendedReal running_cost_c(const ClfReadout& r, double v, const ControllerSpec& s) {
    const double ri = inv_weight_c(r, s);
    const double w = r.beta + v * v;
    return ExtendedReal(state_penalty_c(r, s)) + detail::guarded_ratio(w * w * v * v, ri);
}

inline ExtendedReal running_cost_q(const ClfReadout& r, double v, const ControllerSpec& s) {
    const double ri = inv_weight_q(r, s);
    const double w = r.beta - v;
    return ExtendedReal(state_penalty_q(r, s)) + detail::guarded_ratio(w * w * v * v, ri);
}

inline double residual_c(const ClfReadout& r, double v, const ControllerSpec& s) {
    const double k = kappa_c_star(r, s);
    const double d = (r.beta * v + v * v * v) - (r.beta * k + k * k * k);
    return detail::guarded_ratio_finite(d * d, inv_weight_c(r, s));
}

inline double residual_q(const ClfReadout& r, double v, const ControllerSpec& s) {
    const double k = kappa_q_star(r, s);
    const double d = (v - k) * ((r.beta - k) - v);
    return detail::guarded_ratio_finite(d * d, inv_weight_q(r, s));
}

inline CostSample cost_sample(const ClfReadout& r, double v, const ControllerSpec& s) {
    CostSample c;
    if (structure_of(s) == ClfStructure::cubic) {
        const double w = r.beta + v * v;
        c.state_penalty = state_penalty_c(r, s);
        c.control_penalty = detail::guarded_ratio(w * w * v * v, inv_weight_c(r, s));
        c.residual = residual_c(r, v, s);
    } else {
        const double w = r.beta - v;
        c.state_penalty = state_penalty_q(r, s);
        c.control_penalty = detail::guarded_ratio(w * w * v * v, inv_weight_q(r, s));
        c.residual = residual_q(r, v, s);
    }
    c.integrand = ExtendedReal(c.state_penalty) + c.control_penalty;
    return c;
}

// Trapezoid-in-time accumulation of integrand and residual samples.
class CostAccumulator {
public:
    CostAccumulator(double m, double t0, double V0, const CostSample& first)
        : t_(t0), last_(first) {
        ledger_.m = m;
        ledger_.initial_V = V0;
        ledger_.theoretical_min = 2.0 * m * V0;
        ledger_.horizon = t0;
        ledger_.tail_V = V0;
    }

    void add(double t, double V, const CostSample& next) {
        const double h = t - t_;
        ledger_.accumulated += (0.5 * h) * last_.integrand;
        ledger_.accumulated += (0.5 * h) * next.integrand;
        ledger_.residual_integral += 0.5 * h * (last_.residual + next.residual);
        t_ = t;
        last_ = next;
        ledger_.horizon = t;
        ledger_.tail_V = V;
    }

    const CostLedger& ledger() const noexcept { return ledger_; }

private:
    double t_;
    CostSample last_;
    CostLedger ledger_;
};

} // namespace invopt
