#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "clf_laws.hpp"
#include "cost.hpp"
#include "errors.hpp"
#include "pde_plant.hpp"

namespace invopt {

enum class HorizonMode { fixed_T, rel_tol };
enum class DtMode { fixed, automatic };

struct HorizonPolicy {
    HorizonMode mode = HorizonMode::rel_tol;
    double value = 1e-8;
    friend bool operator==(const HorizonPolicy&, const HorizonPolicy&) = default;
};

struct DtPolicy {
    DtMode mode = DtMode::automatic;
    double value = 0.0; // step for fixed mode; ignored for automatic
    friend bool operator==(const DtPolicy&, const DtPolicy&) = default;
};

inline constexpr std::size_t default_step_cap = 10'000'000;

struct Scenario {
    std::string name;
    PlantSpec plant{};
    std::size_t n = 201;
    ControllerSpec controller{};
    InitialCondition ic{};
    HorizonPolicy horizon{};
    DtPolicy dt{};
    std::size_t log_stride = 1;
    friend bool operator==(const Scenario&, const Scenario&) = default;
};

inline void validate(const Scenario& s) {
    const ClfStructure plant_structure = structure_of(s.plant.kind);
    if (s.controller.law == Law::perturbed && s.controller.perturb_base != Law::cardano &&
        s.controller.perturb_base != Law::quad_plus)
        throw Error(ErrorKind::ParseError, s.name + ": perturb_base must be cardano or quad_plus");
    if (structure_of(s.controller) != plant_structure) {
        std::string law(to_string(s.controller.law));
        if (s.controller.law == Law::perturbed) law += "(" + std::string(to_string(s.controller.perturb_base)) + ")";
        throw Error(ErrorKind::IncompatibleLawPlant,
                    s.name + ": law " + law + " does not match plant " + std::string(to_string(s.plant.kind)));
    }
    require_gain(s.controller.m);
    if (!(s.plant.eps > 0.0) || !std::isfinite(s.plant.eps))
        throw Error(ErrorKind::ParseError, s.name + ": eps must be > 0");
    if (!std::isfinite(s.plant.reaction.lambda))
        throw Error(ErrorKind::ParseError, s.name + ": reaction.lambda must be finite");
    if (s.n < 3) throw Error(ErrorKind::GridTooSmall, s.name + ": n must be >= 3");
    const AlphaSpec& a = s.controller.alpha;
    if (!(a.c > 0.0) || !std::isfinite(a.c)) throw Error(ErrorKind::ParseError, s.name + ": alpha.c must be > 0");
    if (a.kind == AlphaKind::power && (!(a.p > 0.0) || !std::isfinite(a.p)))
        throw Error(ErrorKind::ParseError, s.name + ": alpha.p must be > 0");
    if (!(s.horizon.value > 0.0) || !std::isfinite(s.horizon.value))
        throw Error(ErrorKind::ParseError, s.name + ": horizon.value must be > 0");
    if (s.dt.mode == DtMode::fixed && (!(s.dt.value > 0.0) || !std::isfinite(s.dt.value)))
        throw Error(ErrorKind::ParseError, s.name + ": dt.value must be > 0 in fixed mode");
    if (s.log_stride < 1) throw Error(ErrorKind::ParseError, s.name + ": log_stride must be >= 1");
    if (!std::isfinite(s.controller.perturb_delta))
        throw Error(ErrorKind::ParseError, s.name + ": perturb_delta must be finite");
}

struct TrajectoryRecord {
    double t = 0.0;
    double v = 0.0;
    double V = 0.0;
    double phi = 0.0;
    double beta = 0.0;
    double dVdt_est = 0.0;
    ExtendedReal integrand;
    double residual = 0.0;
    int switch_flag = 0;
};

struct TrajectoryLog {
    std::vector<TrajectoryRecord> records;
    CostLedger ledger;
    std::size_t steps = 0;
    std::size_t switch_count = 0;

    ClfReadout readout(std::size_t i) const {
        return {records[i].V, records[i].phi, records[i].beta};
    }
};

// A failed run keeps everything logged up to the last good step.
class RunFailure : public Error {
public:
    RunFailure(ErrorKind k, const std::string& what, TrajectoryLog partial)
        : Error(k, what), partial_(std::move(partial)) {}
    const TrajectoryLog& partial_log() const noexcept { return partial_; }

private:
    TrajectoryLog partial_;
};

// ---- generic closed-loop machinery ----

using State = std::vector<double>;

// A plant whose CLF readout is computed from the state and whose scalar input
// is stored in the state (the actuation slot).
template <class S>
concept ClosedLoopSystem = requires(const S& s, State& x, const State& cx, double v) {
    { s.readout(cx) } -> std::convertible_to<ClfReadout>;
    s.set_input(x, v);
    s.derivative(cx, x);
    s.finalize(x);
    { s.stable_dt(cx) } -> std::convertible_to<double>;
};

// Classical RK4 with the input re-evaluated and written into the slot at each stage.
class Rk4 {
public:
    // Advances x by dt; returns the input applied at the last stage.
    template <ClosedLoopSystem S, class Control>
    double do_step(const S& sys, Control&& control, State& x, double t, double dt) {
        const std::size_t n = x.size();
        resize(n);
        auto stage = [&](const State* k, double c, double ts, State& out) {
            if (k)
                for (std::size_t i = 0; i < n; ++i) s_[i] = x[i] + c * dt * (*k)[i];
            else
                s_ = x;
            const double v = control(std::as_const(s_), ts);
            sys.set_input(s_, v);
            sys.derivative(std::as_const(s_), out);
            return v;
        };
        stage(nullptr, 0.0, t, k1_);
        stage(&k1_, 0.5, t + 0.5 * dt, k2_);
        stage(&k2_, 0.5, t + 0.5 * dt, k3_);
        const double v4 = stage(&k3_, 1.0, t + dt, k4_);
        for (std::size_t i = 0; i < n; ++i)
            x[i] += dt / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
        sys.set_input(x, v4);
        sys.finalize(x);
        return v4;
    }

private:
    void resize(std::size_t n) {
        if (k1_.size() != n) {
            s_.assign(n, 0.0);
            k1_.assign(n, 0.0);
            k2_.assign(n, 0.0);
            k3_.assign(n, 0.0);
            k4_.assign(n, 0.0);
        }
    }
    State s_, k1_, k2_, k3_, k4_;
};

inline bool all_finite(const State& x) noexcept {
    return std::all_of(x.begin(), x.end(), [](double u) { return std::isfinite(u); });
}

// Floating overflow in a cost sample, as opposed to the deliberate +inf sentinel.
inline bool overflowed(const CostSample& c) noexcept {
    if (std::isnan(c.residual)) return true;
    // an infinite residual is legitimate only alongside the sentinel (zero inverse weight)
    return c.integrand.is_finite() && (!std::isfinite(c.integrand.value()) || std::isinf(c.residual));
}

inline bool finite_readout(const ClfReadout& r) noexcept {
    return std::isfinite(r.V) && std::isfinite(r.phi) && std::isfinite(r.beta);
}

// Second-order derivative estimate on a possibly non-uniform time grid.
inline std::vector<double> estimate_derivative(const std::vector<double>& t, const std::vector<double>& y) {
    const std::size_t n = t.size();
    std::vector<double> d(n, 0.0);
    if (n < 2) return d;
    if (n == 2) {
        d[0] = d[1] = (y[1] - y[0]) / (t[1] - t[0]);
        return d;
    }
    auto three_point = [&](std::size_t a, std::size_t b, std::size_t c, double at) {
        // derivative of the quadratic through (t_a,y_a), (t_b,y_b), (t_c,y_c) at 'at'
        const double ta = t[a], tb = t[b], tc = t[c];
        return y[a] * ((at - tb) + (at - tc)) / ((ta - tb) * (ta - tc)) +
               y[b] * ((at - ta) + (at - tc)) / ((tb - ta) * (tb - tc)) +
               y[c] * ((at - ta) + (at - tb)) / ((tc - ta) * (tc - tb));
    };
    d[0] = three_point(0, 1, 2, t[0]);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = three_point(i - 1, i, i + 1, t[i]);
    d[n - 1] = three_point(n - 3, n - 2, n - 1, t[n - 1]);
    return d;
}

struct RunOptions {
    HorizonPolicy horizon{};
    DtPolicy dt{};
    std::size_t log_stride = 1;
    std::size_t step_cap = default_step_cap;
    double growth_cap = 1e12; // V above growth_cap * max(V(0), 1) counts as blow-up
};

namespace detail {

inline std::string num_str(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

// Which quadratic root the switching law picked: the minus root for beta >= 0.
inline int switching_branch(const ClfReadout& r) noexcept { return r.beta < 0.0 ? 1 : -1; }

inline void finish_log(TrajectoryLog& log) {
    std::vector<double> t, V;
    t.reserve(log.records.size());
    V.reserve(log.records.size());
    for (const auto& r : log.records) {
        t.push_back(r.t);
        V.push_back(r.V);
    }
    const auto d = estimate_derivative(t, V);
    for (std::size_t i = 0; i < d.size(); ++i) log.records[i].dVdt_est = d[i];
}

} // namespace detail

template <ClosedLoopSystem S>
TrajectoryLog run_closed_loop(const S& sys, State x, const ControllerSpec& spec, const RunOptions& opt) {
    TrajectoryLog log;
    const bool switching = spec.law == Law::switching;
    auto control = [&](const State& st, double) { return evaluate_law(sys.readout(st), spec); };

    double t = 0.0;
    ClfReadout r = sys.readout(x);
    if (!finite_readout(r)) throw Error(ErrorKind::UnstableStep, "non-finite initial readout");
    double v = evaluate_law(r, spec);
    CostSample cs = cost_sample(r, v, spec);
    if (overflowed(cs)) throw Error(ErrorKind::UnstableStep, "initial cost sample overflowed");
    CostAccumulator acc(spec.m, t, r.V, cs);
    const double V0 = r.V;
    int branch = detail::switching_branch(r);
    int pending_switch = 0;

    auto record = [&](int flag) {
        log.records.push_back({t, v, r.V, r.phi, r.beta, 0.0, cs.integrand, cs.residual, flag});
    };
    record(0);

    auto done = [&] {
        if (opt.horizon.mode == HorizonMode::fixed_T) return t >= opt.horizon.value * (1.0 - 1e-14);
        return r.V <= opt.horizon.value * V0;
    };
    auto fail = [&](ErrorKind k, const std::string& msg) {
        log.ledger = acc.ledger();
        detail::finish_log(log);
        throw RunFailure(k, msg, std::move(log));
    };

    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    Rk4 rk;
    bool logged_last = true;
    while (!done()) {
        if (log.steps >= opt.step_cap)
            fail(ErrorKind::HorizonExceeded, "step cap " + std::to_string(opt.step_cap) + " reached at t=" + detail::num_str(t));
        double dt = opt.dt.mode == DtMode::fixed ? opt.dt.value : sys.stable_dt(x);
        if (opt.horizon.mode == HorizonMode::fixed_T) dt = std::min(dt, opt.horizon.value - t);
        if (!(dt > 0.0) || t + dt == t)
            fail(ErrorKind::UnstableStep, "time step collapsed to " + detail::num_str(dt) + " at t=" + detail::num_str(t));
        State prev = x;
        try {
            rk.do_step(sys, control, x, t, dt);
        } catch (const Error& e) {
            x = std::move(prev);
            fail(ErrorKind::UnstableStep, "law evaluation failed inside step " + std::to_string(log.steps + 1) +
                                              " at t=" + detail::num_str(t) + ": " + e.what());
        }
        ClfReadout rn = all_finite(x) ? sys.readout(x) : ClfReadout{nan, nan, nan};
        if (!finite_readout(rn) || rn.V < 0.0) {
            x = std::move(prev);
            fail(ErrorKind::UnstableStep, "non-finite state after step " + std::to_string(log.steps + 1) +
                                              " at t=" + detail::num_str(t + dt));
        }
        if (rn.V > opt.growth_cap * std::max(V0, 1.0)) {
            x = std::move(prev);
            fail(ErrorKind::UnstableStep, "V grew past " + detail::num_str(opt.growth_cap) + " x max(V(0), 1) at t=" +
                                              detail::num_str(t + dt));
        }
        double vn = 0.0;
        try {
            vn = evaluate_law(rn, spec);
        } catch (const Error& e) {
            fail(ErrorKind::UnstableStep, std::string("law evaluation failed: ") + e.what());
        }
        ++log.steps;
        t += dt;
        r = rn;
        v = vn;
        cs = cost_sample(r, v, spec);
        if (overflowed(cs)) {
            --log.steps;
            fail(ErrorKind::UnstableStep, "cost sample overflowed at t=" + detail::num_str(t));
        }
        acc.add(t, r.V, cs);
        if (switching) {
            const int b = detail::switching_branch(r);
            if (b != branch) {
                ++log.switch_count;
                pending_switch = 1;
            }
            branch = b;
        }
        logged_last = log.steps % opt.log_stride == 0;
        if (logged_last) {
            record(pending_switch);
            pending_switch = 0;
        }
    }
    if (!logged_last) record(pending_switch);
    log.ledger = acc.ledger();
    detail::finish_log(log);
    return log;
}

// ---- the PDE plants as a closed-loop system ----

class PdeSystem {
public:
    PdeSystem(PlantSpec plant, Grid grid) : plant_(plant), grid_(grid) {}

    ClfReadout readout(const State& u) const { return detail::clf_readout(u, grid_.dx(), plant_); }
    void set_input(State& u, double v) const { u.front() = v; }
    void derivative(const State& u, State& out) const {
        out.resize(u.size());
        rhs_into(u, u.front(), grid_.dx(), plant_, out);
    }
    void finalize(State& u) const { u.back() = 0.0; }
    double stable_dt(const State& u) const {
        double m = 0.0;
        for (double x : u) m = std::max(m, std::abs(x));
        return invopt::stable_dt(plant_, grid_, m);
    }

    const Grid& grid() const noexcept { return grid_; }
    const PlantSpec& plant() const noexcept { return plant_; }

private:
    PlantSpec plant_;
    Grid grid_;
};

inline StateField step(const StateField& field, const Scenario& sc, double dt) {
    const PdeSystem sys(sc.plant, field.grid);
    auto control = [&](const State& st, double) { return evaluate_law(sys.readout(st), sc.controller); };
    StateField out = field;
    Rk4 rk;
    rk.do_step(sys, control, out.values, 0.0, dt);
    if (!all_finite(out.values)) throw Error(ErrorKind::UnstableStep, "non-finite value after step");
    return out;
}

inline RunOptions options_of(const Scenario& sc) {
    return {sc.horizon, sc.dt, sc.log_stride, default_step_cap};
}

inline TrajectoryLog run(const Scenario& sc) {
    validate(sc);
    const Grid grid(sc.n);
    const PdeSystem sys(sc.plant, grid);
    return run_closed_loop(sys, make_initial_field(sc.ic, grid).values, sc.controller, options_of(sc));
}

// ---- certification and comparison ----

struct DecayCertificate {
    bool holds = true;
    double worst_margin = 0.0;
    double tolerance = 0.0;
    bool envelope_checked = false;
    bool envelope_ok = true;
    double worst_envelope_ratio = 0.0; // max V(t) / (V(0) e^{-rate c t})
};

inline DecayCertificate certify_decay(const TrajectoryLog& log, const AlphaSpec& alpha, double rate_multiplier) {
    const auto& rec = log.records;
    if (rec.empty()) throw Error(ErrorKind::EmptyLog, "cannot certify an empty log");
    DecayCertificate c;
    const double V0 = rec.front().V;
    c.tolerance = 0.05 * std::max(1.0, alpha_eval(alpha, V0));
    const std::size_t lo = rec.size() > 2 ? 1 : 0;
    const std::size_t hi = rec.size() > 2 ? rec.size() - 1 : rec.size();
    c.worst_margin = -std::numeric_limits<double>::infinity();
    for (std::size_t i = lo; i < hi; ++i)
        c.worst_margin = std::max(c.worst_margin, rec[i].dVdt_est + rate_multiplier * alpha_eval(alpha, rec[i].V));
    c.holds = c.worst_margin <= c.tolerance;
    if (alpha.kind == AlphaKind::linear) {
        c.envelope_checked = true;
        for (const auto& r : rec) {
            const double env = V0 * std::exp(-rate_multiplier * alpha.c * r.t);
            if (r.V > env * 1.05) c.envelope_ok = false;
            if (env > 0.0) c.worst_envelope_ratio = std::max(c.worst_envelope_ratio, r.V / env);
        }
    }
    return c;
}

struct EffortSummary {
    double int_v2 = 0.0;
    double max_abs_v = 0.0;
};

inline EffortSummary effort_of(const TrajectoryLog& log) {
    EffortSummary e;
    const auto& rec = log.records;
    for (std::size_t i = 0; i < rec.size(); ++i) {
        e.max_abs_v = std::max(e.max_abs_v, std::abs(rec[i].v));
        if (i > 0) e.int_v2 += 0.5 * (rec[i].t - rec[i - 1].t) * (rec[i].v * rec[i].v + rec[i - 1].v * rec[i - 1].v);
    }
    return e;
}

// |v| == min(|kappa_q*|, |beta - kappa_q*|) on every logged sample of a switching run.
struct DominanceCheck {
    bool holds = true;
    std::size_t samples = 0;
    std::size_t violations = 0;
};

inline DominanceCheck check_switching_dominance(const TrajectoryLog& log, const ControllerSpec& spec) {
    DominanceCheck d;
    for (std::size_t i = 0; i < log.records.size(); ++i) {
        const ClfReadout r = log.readout(i);
        const double a = std::abs(kappa_q_star(r, spec));
        const double b = std::abs(kappa_q_complement(r, spec));
        const double v = std::abs(log.records[i].v);
        ++d.samples;
        if (!(v == std::min(a, b))) ++d.violations;
    }
    d.holds = d.violations == 0;
    return d;
}

struct EffortReport {
    EffortSummary a;
    EffortSummary b;
    std::optional<DominanceCheck> dominance; // only when exactly one side is the switching law
};

inline EffortReport compare_effort(const Scenario& sa, const TrajectoryLog& la, const Scenario& sb,
                                   const TrajectoryLog& lb) {
    if (!(sa.plant == sb.plant) || sa.n != sb.n || !(sa.ic == sb.ic))
        throw Error(ErrorKind::MismatchedScenarios, sa.name + " vs " + sb.name + ": plant, grid or IC differ");
    EffortReport rep{effort_of(la), effort_of(lb), std::nullopt};
    const bool a_sw = sa.controller.law == Law::switching;
    const bool b_sw = sb.controller.law == Law::switching;
    auto fixed_root = [](Law l) { return l == Law::quad_plus || l == Law::quad_minus; };
    if (a_sw && fixed_root(sb.controller.law)) rep.dominance = check_switching_dominance(la, sa.controller);
    if (b_sw && fixed_root(sa.controller.law)) rep.dominance = check_switching_dominance(lb, sb.controller);
    return rep;
}

inline EffortReport compare_effort(const Scenario& sa, const Scenario& sb) {
    if (!(sa.plant == sb.plant) || sa.n != sb.n || !(sa.ic == sb.ic))
        throw Error(ErrorKind::MismatchedScenarios, sa.name + " vs " + sb.name + ": plant, grid or IC differ");
    return compare_effort(sa, run(sa), sb, run(sb));
}

} // namespace invopt
