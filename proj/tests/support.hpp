#pragma once

// Shared oracles and generators for the property tests.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

#include "invopt/simulate.hpp"

namespace testing_support {

// Plain bisection on a bracketing interval.
inline double bisect(const std::function<double(double)>& f, double a, double b, double tol = 1e-15) {
    double fa = f(a);
    for (int it = 0; it < 400 && (b - a) > tol * std::max(1.0, std::abs(a)); ++it) {
        const double c = 0.5 * (a + b);
        const double fc = f(c);
        if (fc == 0.0) return c;
        if ((fc < 0.0) == (fa < 0.0)) {
            a = c;
            fa = fc;
        } else {
            b = c;
        }
    }
    return 0.5 * (a + b);
}

// Bracket the unique real root of v^3 + p v + q by doubling outward from 0.
inline double cubic_root_oracle(double p, double q) {
    auto f = [&](double v) { return (v * v + p) * v + q; };
    double r = 1.0;
    while (f(-r) > 0.0 || f(r) < 0.0) r *= 2.0;
    return bisect(f, -r, r);
}

// Composite Simpson with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels = 20000) {
    const double h = (b - a) / panels;
    double s = f(a) + f(b);
    for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
    int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng_); }
    bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }

    // Magnitude spread over decades, random sign when asked.
    double magnitude(double lo_exp, double hi_exp) { return std::pow(10.0, uniform(lo_exp, hi_exp)); }
    double signed_magnitude(double lo_exp, double hi_exp) { return (coin() ? -1.0 : 1.0) * magnitude(lo_exp, hi_exp); }

    invopt::ClfReadout readout(bool allow_zero_parts = true) {
        invopt::ClfReadout r;
        r.V = magnitude(-6, 3);
        r.phi = (allow_zero_parts && coin(0.1)) ? 0.0 : signed_magnitude(-6, 3);
        r.beta = (allow_zero_parts && coin(0.1)) ? 0.0 : signed_magnitude(-6, 3);
        return r;
    }

    invopt::AlphaSpec alpha() {
        invopt::AlphaSpec a;
        if (coin()) {
            a.kind = invopt::AlphaKind::linear;
            a.c = magnitude(-1, 1);
        } else {
            a.kind = invopt::AlphaKind::power;
            a.c = magnitude(-1, 1);
            a.p = uniform(0.5, 2.0);
        }
        return a;
    }

    invopt::ControllerSpec controller(invopt::Law law) {
        invopt::ControllerSpec s;
        s.law = law;
        s.m = coin(0.3) ? 2.0 : uniform(2.0, 6.0);
        s.alpha = alpha();
        return s;
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

inline double rel_err(double a, double b, double scale) { return std::abs(a - b) / std::max(scale, 1e-300); }

// A well-posed finite-dimensional plant with exactly the CLF structure
// dV/dt = phi + beta v + sigma(v), sigma(v) = v^3 or -v^2, and V = z.
// State: {z, s, v}; phi and beta change sign as the phase s advances.
class SurrogatePlant {
public:
    SurrogatePlant(invopt::ClfStructure structure, double dt) : structure_(structure), dt_(dt) {}

    invopt::ClfReadout readout(const invopt::State& x) const {
        const double z = x[0], s = x[1];
        return {z, z * (0.6 * std::sin(3.0 * s) - 0.2), 1.5 * z * std::cos(2.0 * s)};
    }
    void set_input(invopt::State& x, double v) const { x[2] = v; }
    void derivative(const invopt::State& x, invopt::State& out) const {
        out.resize(3);
        const invopt::ClfReadout r = readout(x);
        const double v = x[2];
        const double sigma = structure_ == invopt::ClfStructure::cubic ? v * v * v : -v * v;
        out[0] = r.phi + r.beta * v + sigma;
        out[1] = 1.0;
        out[2] = 0.0;
    }
    void finalize(invopt::State&) const {}
    double stable_dt(const invopt::State&) const { return dt_; }

    static invopt::State initial(double z0) { return {z0, 0.3, 0.0}; }

private:
    invopt::ClfStructure structure_;
    double dt_;
};

// Open-loop run of a PDE plant from u0 = sin(pi x) with a prescribed boundary
// input; compares the time derivative of the logged V with phi + beta v + sigma(v).
// Returns the L1-in-time relative error.
inline double open_loop_consistency(const invopt::PlantSpec& plant, std::size_t n, double T,
                                    const std::function<double(double)>& input) {
    using namespace invopt;
    const Grid grid(n);
    const PdeSystem sys(plant, grid);
    InitialCondition ic;
    State x = make_initial_field(ic, grid).values;
    x[0] = input(0.0);
    Rk4 rk;
    auto control = [&](const State&, double t) { return input(t); };
    std::vector<double> ts, Vs, model;
    const bool cubic = structure_of(plant.kind) == ClfStructure::cubic;
    auto sample = [&](double t) {
        const ClfReadout r = sys.readout(x);
        const double v = x[0];
        ts.push_back(t);
        Vs.push_back(r.V);
        model.push_back(r.phi + r.beta * v + (cubic ? v * v * v : -v * v));
    };
    double t = 0.0;
    sample(t);
    while (t < T * (1.0 - 1e-14)) {
        const double dt = std::min(sys.stable_dt(x), T - t);
        rk.do_step(sys, control, x, t, dt);
        t += dt;
        sample(t);
    }
    const auto d = estimate_derivative(ts, Vs);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 1; i < ts.size(); ++i) {
        const double h = ts[i] - ts[i - 1];
        num += 0.5 * h * (std::abs(d[i] - model[i]) + std::abs(d[i - 1] - model[i - 1]));
        den += 0.5 * h * (std::abs(model[i]) + std::abs(model[i - 1]));
    }
    return num / den;
}

// Smooth boundary input compatible with u0 = sin(pi x) at t = 0 (v(0) = 0).
inline double smooth_input(double t) { return 0.5 * std::sin(3.0 * t); }

} // namespace testing_support
