#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

#include "errors.hpp"
#include "rootfinding.hpp"

namespace invopt {

// (V, phi, beta): the CLF value and the two state-dependent coefficients of its derivative.
struct ClfReadout {
    double V = 0.0;
    double phi = 0.0;
    double beta = 0.0;

    bool is_origin() const noexcept { return V == 0.0 && phi == 0.0 && beta == 0.0; }
    friend bool operator==(const ClfReadout&, const ClfReadout&) = default;
};

enum class AlphaKind { linear, power };

struct AlphaSpec {
    AlphaKind kind = AlphaKind::linear;
    double c = 1.0;
    double p = 1.0;
    friend bool operator==(const AlphaSpec&, const AlphaSpec&) = default;
};

enum class Law { cardano, quad_plus, quad_minus, switching, perturbed };

// Which control structure a law is built for: v^3 (cubic) or -v^2 (quadratic).
enum class ClfStructure { cubic, quadratic };

struct ControllerSpec {
    Law law = Law::cardano;
    double m = 2.0;
    AlphaSpec alpha{};
    double perturb_delta = 0.0;
    Law perturb_base = Law::cardano;
    friend bool operator==(const ControllerSpec&, const ControllerSpec&) = default;
};

inline constexpr double two_sqrt3_over_9 = 0.38490017945975050967; // 2*sqrt(3)/9

constexpr std::string_view to_string(Law l) noexcept {
    switch (l) {
    case Law::cardano: return "cardano";
    case Law::quad_plus: return "quad_plus";
    case Law::quad_minus: return "quad_minus";
    case Law::switching: return "switching";
    case Law::perturbed: return "perturbed";
    }
    return "?";
}

constexpr std::string_view to_string(AlphaKind k) noexcept {
    return k == AlphaKind::linear ? "linear" : "power";
}

inline ClfStructure structure_of(Law law, Law perturb_base = Law::cardano) noexcept {
    if (law == Law::perturbed) law = perturb_base;
    return law == Law::cardano ? ClfStructure::cubic : ClfStructure::quadratic;
}

inline ClfStructure structure_of(const ControllerSpec& s) noexcept {
    return structure_of(s.law, s.perturb_base);
}

inline double alpha_eval(const AlphaSpec& a, double V) {
    if (V < 0.0) throw Error(ErrorKind::NegativeLyapunovValue, "V = " + std::to_string(V));
    if (a.kind == AlphaKind::linear) return a.c * V;
    return V == 0.0 ? 0.0 : a.c * std::pow(V, a.p);
}

inline void require_gain(double m) {
    if (!(m >= 2.0) || !std::isfinite(m))
        throw Error(ErrorKind::InvalidGain, "m must be finite and >= 2, got " + std::to_string(m));
}

inline double q_of(const ClfReadout& r, const AlphaSpec& a) {
    const double b = std::abs(r.beta);
    return std::abs(r.phi) + two_sqrt3_over_9 * b * std::sqrt(b) + alpha_eval(a, r.V);
}

inline double theta_of(const ClfReadout& r, const AlphaSpec& a) {
    return std::abs(r.phi) + alpha_eval(a, r.V);
}

inline double kappa_c(const ClfReadout& r, const AlphaSpec& a) {
    return cardano_unique_real_root({r.beta, q_of(r, a)});
}

namespace detail {

// Roots of v^2 - beta v - m^2 theta = 0; no gain check, so m = 1 works as an algebra probe.
inline QuadraticRoots gain_scaled_roots(double beta, double theta, double m) {
    return stable_quadratic_roots(beta, m * m * theta);
}

// Smaller-magnitude root. Away from beta = 0 this is exactly one of the two roots,
// and that root was produced by the rationalized form -c/larger.
inline double switching_root(double beta, double theta, double m) {
    const QuadraticRoots r = gain_scaled_roots(beta, theta, m);
    if (beta > 0.0) return r.minus;
    if (beta < 0.0) return r.plus;
    return -std::min(r.plus, -r.minus);
}

} // namespace detail

inline double kappa_c_star(const ClfReadout& r, const ControllerSpec& s) {
    require_gain(s.m);
    return s.m * kappa_c({r.V, r.phi, r.beta / (s.m * s.m)}, s.alpha);
}

inline double kappa_q_star(const ClfReadout& r, const ControllerSpec& s) {
    require_gain(s.m);
    return detail::gain_scaled_roots(r.beta, theta_of(r, s.alpha), s.m).plus;
}

// beta - kappa_q_star, taken from the cancellation-free minus root.
inline double kappa_q_complement(const ClfReadout& r, const ControllerSpec& s) {
    require_gain(s.m);
    return detail::gain_scaled_roots(r.beta, theta_of(r, s.alpha), s.m).minus;
}

inline double kappa_s_star(const ClfReadout& r, const ControllerSpec& s) {
    require_gain(s.m);
    return detail::switching_root(r.beta, theta_of(r, s.alpha), s.m);
}

inline double kappa_perturbed(const ClfReadout& r, const ControllerSpec& s) {
    if (s.perturb_base == Law::quad_plus) return kappa_q_star(r, s) + s.perturb_delta;
    if (s.perturb_base == Law::cardano) return kappa_c_star(r, s) + s.perturb_delta;
    throw std::invalid_argument("perturbed law base must be cardano or quad_plus");
}

inline double evaluate_law(const ClfReadout& r, const ControllerSpec& s) {
    switch (s.law) {
    case Law::cardano: return kappa_c_star(r, s);
    case Law::quad_plus: return kappa_q_star(r, s);
    case Law::quad_minus: return kappa_q_complement(r, s);
    case Law::switching: return kappa_s_star(r, s);
    case Law::perturbed: return kappa_perturbed(r, s);
    }
    return 0.0;
}

// The unique optimal law of the structure, used as the reference in residual forms.
inline double optimal_reference(const ClfReadout& r, const ControllerSpec& s) {
    return structure_of(s) == ClfStructure::cubic ? kappa_c_star(r, s) : kappa_q_star(r, s);
}

// Guaranteed decay-rate multiplier on alpha: m^3 for the cubic structure, m^2 for the quadratic one.
inline double decay_rate_multiplier(const ControllerSpec& s) {
    return structure_of(s) == ClfStructure::cubic ? s.m * s.m * s.m : s.m * s.m;
}

} // namespace invopt
