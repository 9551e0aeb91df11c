#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "simulate.hpp"

namespace invopt {

struct VerifyToggles {
    bool decay = true;
    bool cost = true;
    bool effort = false;
    friend bool operator==(const VerifyToggles&, const VerifyToggles&) = default;
};

struct ScenarioEntry {
    Scenario scenario;
    VerifyToggles verify;
    friend bool operator==(const ScenarioEntry&, const ScenarioEntry&) = default;
};

struct RunManifest {
    std::vector<ScenarioEntry> scenarios;
    std::string output_dir = "out";
    std::uint64_t seed = 0; // reserved for randomized initial conditions
    friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

inline constexpr int manifest_schema = 1;

namespace detail {

using nlohmann::json;

class FieldReader {
public:
    FieldReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail("expected an object");
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw Error(ErrorKind::ParseError, "field '" + (path_.empty() ? std::string("<root>") : path_) + "': " + msg);
    }

    std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const char* key) const { return j_.contains(key); }
    const json& at(const char* key) const { return j_.at(key); }

    void only(std::initializer_list<const char*> keys) const {
        std::set<std::string> allowed(keys.begin(), keys.end());
        for (const auto& [k, v] : j_.items())
            if (!allowed.count(k)) throw Error(ErrorKind::ParseError, "field '" + sub(k) + "': unknown key");
    }

    double number(const char* key, double def) const {
        if (!has(key)) return def;
        const json& v = j_.at(key);
        if (!v.is_number()) throw Error(ErrorKind::ParseError, "field '" + sub(key) + "': expected a number");
        return v.get<double>();
    }

    std::uint64_t unsigned_int(const char* key, std::uint64_t def) const {
        if (!has(key)) return def;
        const json& v = j_.at(key);
        if (!v.is_number_unsigned())
            throw Error(ErrorKind::ParseError, "field '" + sub(key) + "': expected a nonnegative integer");
        return v.get<std::uint64_t>();
    }

    bool boolean(const char* key, bool def) const {
        if (!has(key)) return def;
        const json& v = j_.at(key);
        if (!v.is_boolean()) throw Error(ErrorKind::ParseError, "field '" + sub(key) + "': expected true/false");
        return v.get<bool>();
    }

    std::string string(const char* key, const std::string& def, bool required = false) const {
        if (!has(key)) {
            if (required) throw Error(ErrorKind::ParseError, "field '" + sub(key) + "': required");
            return def;
        }
        const json& v = j_.at(key);
        if (!v.is_string()) throw Error(ErrorKind::ParseError, "field '" + sub(key) + "': expected a string");
        return v.get<std::string>();
    }

    template <class Enum, std::size_t N>
    Enum choice(const char* key, Enum def, const std::pair<const char*, Enum> (&table)[N], bool required = false) const {
        if (!has(key) && !required) return def;
        const std::string s = string(key, "", required);
        std::string options;
        for (const auto& [name, e] : table) {
            if (s == name) return e;
            options += std::string(options.empty() ? "" : ", ") + name;
        }
        throw Error(ErrorKind::ParseError, "field '" + sub(key) + "': '" + s + "' is not one of " + options);
    }

private:
    const json& j_;
    std::string path_;
};

inline constexpr std::pair<const char*, PlantKind> plant_names[] = {
    {"quadratic_convection", PlantKind::quadratic_convection},
    {"counter_convection", PlantKind::counter_convection},
    {"linear_convection", PlantKind::linear_convection}};
inline constexpr std::pair<const char*, Law> law_names[] = {
    {"cardano", Law::cardano}, {"quad_plus", Law::quad_plus}, {"quad_minus", Law::quad_minus},
    {"switching", Law::switching}, {"perturbed", Law::perturbed}};
inline constexpr std::pair<const char*, Law> base_law_names[] = {{"cardano", Law::cardano},
                                                                  {"quad_plus", Law::quad_plus}};
inline constexpr std::pair<const char*, ReactionKind> reaction_names[] = {{"zero", ReactionKind::zero},
                                                                          {"linear", ReactionKind::linear}};
inline constexpr std::pair<const char*, IcKind> ic_names[] = {
    {"zero", IcKind::zero}, {"sine", IcKind::sine}, {"bump", IcKind::bump}, {"csv", IcKind::csv}};
inline constexpr std::pair<const char*, AlphaKind> alpha_names[] = {{"linear", AlphaKind::linear},
                                                                    {"power", AlphaKind::power}};
inline constexpr std::pair<const char*, DtMode> dt_names[] = {{"fixed", DtMode::fixed}, {"auto", DtMode::automatic}};
inline constexpr std::pair<const char*, HorizonMode> horizon_names[] = {{"fixed_T", HorizonMode::fixed_T},
                                                                        {"rel_tol", HorizonMode::rel_tol}};

inline VerifyToggles read_verify(const json& j, const std::string& path, VerifyToggles def) {
    FieldReader r(j, path);
    r.only({"decay", "cost", "effort"});
    return {r.boolean("decay", def.decay), r.boolean("cost", def.cost), r.boolean("effort", def.effort)};
}

inline ScenarioEntry read_scenario(const json& j, const std::string& path, const VerifyToggles& verify_default,
                                   const std::filesystem::path& base_dir) {
    FieldReader r(j, path);
    r.only({"name", "plant", "eps", "reaction", "n", "ic", "law", "m", "alpha", "dt", "horizon", "verify",
            "log_stride", "perturb_delta", "perturb_base"});
    ScenarioEntry e;
    Scenario& s = e.scenario;
    s.name = r.string("name", "");
    s.plant.kind = r.choice("plant", PlantKind::counter_convection, plant_names, true);
    s.plant.eps = r.number("eps", 1.0);
    if (r.has("reaction")) {
        FieldReader rr(r.at("reaction"), r.sub("reaction"));
        rr.only({"kind", "lambda"});
        s.plant.reaction.kind = rr.choice("kind", ReactionKind::zero, reaction_names);
        s.plant.reaction.lambda = rr.number("lambda", 0.0);
    }
    s.n = r.unsigned_int("n", 201);
    if (r.has("ic")) {
        FieldReader ri(r.at("ic"), r.sub("ic"));
        ri.only({"kind", "amplitude", "path", "column"});
        s.ic.kind = ri.choice("kind", IcKind::sine, ic_names);
        s.ic.amplitude = ri.number("amplitude", 1.0);
        if (s.ic.kind == IcKind::csv) {
            const std::filesystem::path p = ri.string("path", "", true);
            s.ic.path = (p.is_absolute() ? p : base_dir / p).lexically_normal().string();
            s.ic.column = ri.string("column", "0");
        } else if (ri.has("path") || ri.has("column")) {
            ri.fail("path/column only apply to kind 'csv'");
        }
    }
    s.controller.law = r.choice("law", Law::cardano, law_names, true);
    s.controller.m = r.number("m", 2.0);
    if (r.has("alpha")) {
        FieldReader ra(r.at("alpha"), r.sub("alpha"));
        ra.only({"kind", "c", "p"});
        s.controller.alpha.kind = ra.choice("kind", AlphaKind::linear, alpha_names);
        s.controller.alpha.c = ra.number("c", 1.0);
        s.controller.alpha.p = ra.number("p", 1.0);
    }
    s.controller.perturb_delta = r.number("perturb_delta", 0.0);
    s.controller.perturb_base = r.choice("perturb_base", Law::cardano, base_law_names);
    if (s.controller.law != Law::perturbed && (r.has("perturb_delta") || r.has("perturb_base")))
        r.fail("perturb_delta/perturb_base only apply to law 'perturbed'");
    if (r.has("dt")) {
        FieldReader rd(r.at("dt"), r.sub("dt"));
        rd.only({"mode", "value"});
        s.dt.mode = rd.choice("mode", DtMode::automatic, dt_names);
        s.dt.value = rd.number("value", 0.0);
    }
    if (r.has("horizon")) {
        FieldReader rh(r.at("horizon"), r.sub("horizon"));
        rh.only({"mode", "value"});
        s.horizon.mode = rh.choice("mode", HorizonMode::rel_tol, horizon_names);
        s.horizon.value = rh.number("value", s.horizon.mode == HorizonMode::rel_tol ? 1e-8 : 1.0);
    }
    s.log_stride = r.unsigned_int("log_stride", 1);
    e.verify = r.has("verify") ? read_verify(r.at("verify"), r.sub("verify"), verify_default) : verify_default;
    return e;
}

inline bool safe_name(const std::string& s) {
    if (s.empty() || s == "." || s == ".." || s == "summary") return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' || c == '='))
            return false;
    return true;
}

inline std::size_t line_of(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

} // namespace detail

// Validates the manifest: unique safe names, law/plant pairing, gains, grid, policies.
inline void validate(const RunManifest& m) {
    std::set<std::string> names;
    for (std::size_t i = 0; i < m.scenarios.size(); ++i) {
        const ScenarioEntry& e = m.scenarios[i];
        const std::string& name = e.scenario.name;
        if (!detail::safe_name(name))
            throw Error(ErrorKind::ParseError, "field 'scenarios[" + std::to_string(i) + "].name': '" + name +
                                                   "' is not a usable file name");
        if (!names.insert(name).second)
            throw Error(ErrorKind::ParseError, "field 'scenarios[" + std::to_string(i) + "].name': duplicate '" + name + "'");
        validate(e.scenario);
        if (e.verify.cost && e.scenario.log_stride != 1)
            throw Error(ErrorKind::ParseError, name + ": cost verification requires log_stride = 1");
    }
}

inline RunManifest parse_manifest_text(const std::string& text, const std::filesystem::path& base_dir = ".",
                                       const std::string& origin = "<manifest>") {
    using nlohmann::json;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::ParseError, origin + ":" + std::to_string(detail::line_of(text, e.byte)) + ": " + e.what());
    }
    RunManifest m;
    detail::FieldReader top(j, "");
    VerifyToggles verify_default;
    if (top.has("verify")) verify_default = detail::read_verify(top.at("verify"), "verify", verify_default);

    std::vector<std::pair<const json*, std::string>> items;
    if (top.has("scenarios")) {
        top.only({"schema", "output_dir", "seed", "verify", "scenarios"});
        if (top.has("schema") && top.at("schema") != json(manifest_schema))
            top.fail("unsupported schema (expected " + std::to_string(manifest_schema) + ")");
        m.output_dir = top.string("output_dir", m.output_dir);
        m.seed = top.unsigned_int("seed", 0);
        const json& arr = top.at("scenarios");
        if (!arr.is_array()) throw Error(ErrorKind::ParseError, "field 'scenarios': expected an array");
        for (std::size_t i = 0; i < arr.size(); ++i) items.emplace_back(&arr[i], "scenarios[" + std::to_string(i) + "]");
    } else {
        items.emplace_back(&j, "");
    }
    for (std::size_t i = 0; i < items.size(); ++i)
        m.scenarios.push_back(detail::read_scenario(*items[i].first, items[i].second, verify_default, base_dir));

    // Default names: <plant>-<law>, suffixed with the index if that is taken.
    std::set<std::string> taken;
    for (const auto& e : m.scenarios)
        if (!e.scenario.name.empty()) taken.insert(e.scenario.name);
    for (std::size_t i = 0; i < m.scenarios.size(); ++i) {
        Scenario& s = m.scenarios[i].scenario;
        if (!s.name.empty()) continue;
        std::string name = std::string(to_string(s.plant.kind)) + "-" + std::string(to_string(s.controller.law));
        if (taken.count(name)) name += "-" + std::to_string(i);
        taken.insert(name);
        s.name = name;
    }
    validate(m);
    return m;
}

inline RunManifest parse_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ParseError, path.string() + ": cannot open");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_manifest_text(ss.str(), path.parent_path().empty() ? "." : path.parent_path(), path.string());
}

inline nlohmann::json to_json(const ScenarioEntry& e) {
    const Scenario& s = e.scenario;
    nlohmann::json j;
    j["name"] = s.name;
    j["plant"] = to_string(s.plant.kind);
    j["eps"] = s.plant.eps;
    j["reaction"] = {{"kind", to_string(s.plant.reaction.kind)}, {"lambda", s.plant.reaction.lambda}};
    j["n"] = s.n;
    j["ic"] = {{"kind", to_string(s.ic.kind)}, {"amplitude", s.ic.amplitude}};
    if (s.ic.kind == IcKind::csv) {
        j["ic"]["path"] = s.ic.path;
        j["ic"]["column"] = s.ic.column;
    }
    j["law"] = to_string(s.controller.law);
    j["m"] = s.controller.m;
    j["alpha"] = {{"kind", to_string(s.controller.alpha.kind)}, {"c", s.controller.alpha.c}, {"p", s.controller.alpha.p}};
    if (s.controller.law == Law::perturbed) {
        j["perturb_delta"] = s.controller.perturb_delta;
        j["perturb_base"] = to_string(s.controller.perturb_base);
    }
    j["dt"] = {{"mode", s.dt.mode == DtMode::fixed ? "fixed" : "auto"}, {"value", s.dt.value}};
    j["horizon"] = {{"mode", s.horizon.mode == HorizonMode::fixed_T ? "fixed_T" : "rel_tol"}, {"value", s.horizon.value}};
    j["verify"] = {{"decay", e.verify.decay}, {"cost", e.verify.cost}, {"effort", e.verify.effort}};
    j["log_stride"] = s.log_stride;
    return j;
}

inline nlohmann::json to_json(const RunManifest& m) {
    nlohmann::json j;
    j["schema"] = manifest_schema;
    j["output_dir"] = m.output_dir;
    j["seed"] = m.seed;
    j["scenarios"] = nlohmann::json::array();
    for (const auto& e : m.scenarios) j["scenarios"].push_back(to_json(e));
    return j;
}

inline std::string serialize_manifest(const RunManifest& m) { return to_json(m).dump(2) + "\n"; }

} // namespace invopt
