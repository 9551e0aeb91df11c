#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "manifest.hpp"
#include "simulate.hpp"

namespace invopt {

struct ScenarioOutcome {
    ScenarioEntry entry;
    TrajectoryLog log; // partial when the run failed
    bool completed = false;
    std::string error;
    std::optional<DecayCertificate> certificate;
    EffortSummary effort;
    std::optional<DominanceCheck> dominance;
    std::vector<std::string> failures;
    std::vector<std::string> warnings;

    const std::string& name() const { return entry.scenario.name; }
    bool passed() const { return failures.empty(); }
};

struct BatchOptions {
    std::optional<std::string> out_dir;
    std::size_t jobs = 1;
    bool strict = false;
};

namespace detail {

inline std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string fmt_short(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

// JSON cannot carry inf/nan; encode them as strings.
inline nlohmann::json num(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return "nan";
    return x > 0 ? "inf" : "-inf";
}

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::IoError, "cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw Error(ErrorKind::IoError, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

} // namespace detail

inline std::string trajectory_csv(const TrajectoryLog& log) {
    std::string s = "t,v,V,phi,beta,dVdt_est,integrand,residual,switch_flag\n";
    for (const auto& r : log.records) {
        s += detail::fmt(r.t) + ',' + detail::fmt(r.v) + ',' + detail::fmt(r.V) + ',' + detail::fmt(r.phi) + ',' +
             detail::fmt(r.beta) + ',' + detail::fmt(r.dVdt_est) + ',' + r.integrand.str() + ',' +
             detail::fmt(r.residual) + ',' + std::to_string(r.switch_flag) + '\n';
    }
    return s;
}

inline nlohmann::json ledger_json(const CostLedger& l) {
    using detail::num;
    return {{"accumulated", l.accumulated.is_infinite() ? nlohmann::json("inf") : num(l.accumulated.value())},
            {"theoretical_min", num(l.theoretical_min)},
            {"residual_integral", num(l.residual_integral)},
            {"horizon", num(l.horizon)},
            {"tail_V", num(l.tail_V)},
            {"initial_V", num(l.initial_V)},
            {"collectable", num(l.collectable())},
            {"uncollected_tail", num(l.uncollected_tail())},
            {"ratio", num(l.optimality_ratio())},
            {"valid", l.valid()}};
}

inline nlohmann::json outcome_json(const ScenarioOutcome& o) {
    using detail::num;
    nlohmann::json j;
    j["schema"] = 1;
    j["name"] = o.name();
    j["scenario"] = to_json(o.entry);
    j["status"] = o.completed ? "completed" : "failed";
    if (!o.completed) j["error"] = o.error;
    j["steps"] = o.log.steps;
    j["samples"] = o.log.records.size();
    j["switch_count"] = o.log.switch_count;
    j["ledger"] = ledger_json(o.log.ledger);
    if (o.certificate) {
        const auto& c = *o.certificate;
        j["certificate"] = {{"holds", c.holds},
                            {"worst_margin", num(c.worst_margin)},
                            {"tolerance", num(c.tolerance)},
                            {"envelope_checked", c.envelope_checked},
                            {"envelope_ok", c.envelope_ok},
                            {"worst_envelope_ratio", num(c.worst_envelope_ratio)}};
    }
    j["effort"] = {{"int_v2", num(o.effort.int_v2)}, {"max_abs_v", num(o.effort.max_abs_v)}};
    if (o.dominance)
        j["switching_dominance"] = {{"holds", o.dominance->holds},
                                    {"samples", o.dominance->samples},
                                    {"violations", o.dominance->violations}};
    j["passed"] = o.passed();
    j["failures"] = o.failures;
    j["warnings"] = o.warnings;
    return j;
}

// Runs one scenario and evaluates the requested checks; never throws for run failures.
inline ScenarioOutcome execute(const ScenarioEntry& entry, bool strict) {
    ScenarioOutcome o;
    o.entry = entry;
    const Scenario& sc = entry.scenario;
    try {
        o.log = run(sc);
        o.completed = true;
    } catch (const RunFailure& f) {
        o.log = f.partial_log();
        o.error = f.what();
    } catch (const std::exception& e) {
        o.error = e.what();
    }
    if (!o.completed) o.failures.push_back("run failed: " + o.error);
    if (o.log.records.empty()) return o;

    const ControllerSpec& ctl = sc.controller;
    o.effort = effort_of(o.log);
    o.certificate = certify_decay(o.log, ctl.alpha, decay_rate_multiplier(ctl));
    if (ctl.law == Law::switching) o.dominance = check_switching_dominance(o.log, ctl);
    if (!o.completed) return o;

    if (entry.verify.decay) {
        if (!o.certificate->holds)
            o.failures.push_back("decay certificate fails: worst margin " + detail::fmt_short(o.certificate->worst_margin) +
                                 " > tolerance " + detail::fmt_short(o.certificate->tolerance));
        if (o.certificate->envelope_checked && !o.certificate->envelope_ok) {
            const std::string w = "decay envelope exceeded (worst ratio " +
                                  detail::fmt_short(o.certificate->worst_envelope_ratio) + ")";
            (strict ? o.failures : o.warnings).push_back(w);
        }
    }
    if (entry.verify.cost) {
        const CostLedger& l = o.log.ledger;
        if (!l.valid()) {
            o.failures.push_back("cost ledger is infinite");
        } else {
            const double J = l.accumulated.value();
            const double gap = std::abs(J - l.residual_integral - l.collectable());
            if (gap > 1e-3 * J)
                o.failures.push_back("ledger identity off by " + detail::fmt_short(gap / std::max(J, 1e-300)) + " relative");
            if (ctl.law != Law::perturbed) {
                const double ratio = l.optimality_ratio();
                if (l.collectable() > 0.0 && !(ratio >= 0.98 && ratio <= 1.02))
                    o.failures.push_back("optimality ratio " + detail::fmt_short(ratio) + " outside [0.98, 1.02]");
                if (l.residual_integral > 1e-6 * J)
                    o.failures.push_back("residual integral " + detail::fmt_short(l.residual_integral) + " > 1e-6 J");
            }
        }
    }
    if (entry.verify.effort && o.dominance && !o.dominance->holds)
        o.failures.push_back("switching law is not the smaller root on " + std::to_string(o.dominance->violations) +
                             " samples");
    return o;
}

// Bounded worker pool; results land in input order regardless of scheduling.
inline std::vector<ScenarioOutcome> execute_all(const std::vector<ScenarioEntry>& entries, std::size_t jobs,
                                                bool strict) {
    std::vector<ScenarioOutcome> out(entries.size());
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min(jobs, std::max<std::size_t>(entries.size(), 1));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < entries.size();) out[i] = execute(entries[i], strict);
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t k = 0; k < jobs; ++k) pool.emplace_back(worker);
    }
    return out;
}

inline void print_table(std::ostream& os, const std::vector<const ScenarioOutcome*>& rows) {
    char line[512];
    std::snprintf(line, sizeof line, "%-40s %12s %12s %12s %12s %12s %8s %12s %s\n", "name", "V(0)", "V(T)", "J",
                  "2mV(0)", "residual", "decay", "int v^2", "status");
    os << line;
    for (const auto* o : rows) {
        const CostLedger& l = o->log.ledger;
        const char* decay = !o->certificate ? "-" : (o->certificate->holds ? "holds" : "fails");
        std::snprintf(line, sizeof line, "%-40s %12.5g %12.5g %12s %12.5g %12.5g %8s %12.5g %s\n", o->name().c_str(),
                      l.initial_V, l.tail_V, l.accumulated.is_infinite() ? "inf" : detail::fmt_short(l.accumulated.value()).c_str(),
                      l.theoretical_min, l.residual_integral, decay, o->effort.int_v2,
                      o->passed() ? "PASS" : (o->completed ? "FAIL" : "RUN-FAILED"));
        os << line;
    }
}

inline int report(const std::vector<ScenarioOutcome>& outcomes, const std::filesystem::path& dir, std::ostream& os,
                  nlohmann::json extra = {}) {
    std::map<std::string, const ScenarioOutcome*> by_name;
    for (const auto& o : outcomes) by_name[o.name()] = &o;
    std::vector<const ScenarioOutcome*> rows;
    for (const auto& [name, o] : by_name) rows.push_back(o);

    nlohmann::json summary;
    summary["schema"] = 1;
    summary["scenarios"] = nlohmann::json::array();
    for (const auto* o : rows) {
        detail::write_atomic(dir / (o->name() + ".csv"), trajectory_csv(o->log));
        const nlohmann::json j = outcome_json(*o);
        detail::write_atomic(dir / (o->name() + ".json"), j.dump(2) + "\n");
        summary["scenarios"].push_back(j);
    }
    bool ok = true;
    for (const auto* o : rows) ok = ok && o->passed();
    summary["passed"] = ok;
    if (!extra.is_null()) summary.update(extra);
    if (!rows.empty()) detail::write_atomic(dir / "summary.json", summary.dump(2) + "\n");

    if (!rows.empty()) print_table(os, rows);
    for (const auto* o : rows) {
        for (const auto& w : o->warnings) os << "warning: " << o->name() << ": " << w << "\n";
        for (const auto& f : o->failures) os << "FAIL: " << o->name() << ": " << f << "\n";
    }
    os << (ok ? "all requested checks passed" : "some requested checks failed") << " (" << rows.size()
       << " scenarios)\n";
    return ok ? 0 : 1;
}

inline std::filesystem::path output_dir(const RunManifest& m, const BatchOptions& opt) {
    return opt.out_dir ? std::filesystem::path(*opt.out_dir) : std::filesystem::path(m.output_dir);
}

inline int cmd_run(const RunManifest& m, const BatchOptions& opt, std::ostream& os) {
    const auto outcomes = execute_all(m.scenarios, opt.jobs, opt.strict);
    return report(outcomes, output_dir(m, opt), os);
}

enum class SweepParam { m, eps, n, delta };

inline SweepParam parse_sweep_param(const std::string& s) {
    if (s == "m") return SweepParam::m;
    if (s == "eps") return SweepParam::eps;
    if (s == "n") return SweepParam::n;
    if (s == "delta") return SweepParam::delta;
    throw Error(ErrorKind::ParseError, "sweep parameter '" + s + "' is not one of m, eps, n, delta");
}

inline int cmd_sweep(const RunManifest& m, const std::string& param, const std::vector<std::string>& values,
                     const BatchOptions& opt, std::ostream& os) {
    const SweepParam p = parse_sweep_param(param);
    if (values.empty()) throw Error(ErrorKind::ParseError, "sweep needs at least one value");
    std::vector<ScenarioEntry> entries;
    for (const auto& base : m.scenarios) {
        if (p == SweepParam::delta && base.scenario.controller.law != Law::perturbed)
            throw Error(ErrorKind::ParseError, base.scenario.name + ": delta sweep needs law 'perturbed'");
        for (const auto& token : values) {
            char* end = nullptr;
            const double x = std::strtod(token.c_str(), &end);
            if (token.empty() || *end != '\0' || !std::isfinite(x))
                throw Error(ErrorKind::ParseError, "sweep value '" + token + "' is not a number");
            ScenarioEntry e = base;
            Scenario& s = e.scenario;
            switch (p) {
            case SweepParam::m: s.controller.m = x; break;
            case SweepParam::eps: s.plant.eps = x; break;
            case SweepParam::n:
                if (x < 3 || x != std::floor(x)) throw Error(ErrorKind::ParseError, "sweep value n=" + token + " is not an integer >= 3");
                s.n = static_cast<std::size_t>(x);
                break;
            case SweepParam::delta: s.controller.perturb_delta = x; break;
            }
            s.name = base.scenario.name + "__" + param + "=" + token;
            entries.push_back(e);
        }
    }
    RunManifest swept = m;
    swept.scenarios = entries;
    validate(swept);

    const auto outcomes = execute_all(entries, opt.jobs, opt.strict);
    std::string csv = "scenario,param,value,status,V0,VT,J,theoretical_min,collectable,ratio,residual_integral,"
                      "horizon,cert_holds,worst_margin,int_v2,steps\n";
    std::size_t k = 0;
    for (const auto& base : m.scenarios) {
        for (const auto& token : values) {
            const ScenarioOutcome& o = outcomes[k++];
            const CostLedger& l = o.log.ledger;
            using detail::fmt;
            csv += base.scenario.name + ',' + param + ',' + token + ',' + (o.completed ? "completed" : "failed") + ',' +
                   fmt(l.initial_V) + ',' + fmt(l.tail_V) + ',' + l.accumulated.str() + ',' + fmt(l.theoretical_min) +
                   ',' + fmt(l.collectable()) + ',' + fmt(l.optimality_ratio()) + ',' + fmt(l.residual_integral) + ',' +
                   fmt(l.horizon) + ',' +
                   (o.certificate ? (o.certificate->holds ? "1" : "0") : "") + ',' +
                   (o.certificate ? fmt(o.certificate->worst_margin) : "") + ',' + fmt(o.effort.int_v2) + ',' +
                   std::to_string(o.log.steps) + '\n';
        }
    }
    const auto dir = output_dir(m, opt);
    detail::write_atomic(dir / ("sweep_" + param + ".csv"), csv);
    return report(outcomes, dir, os, {{"sweep", {{"param", param}, {"values", values}}}});
}

} // namespace invopt
