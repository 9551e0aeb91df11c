#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <cstdlib>
#include <string>
#include <string_view>
#include <vector>

#include "clf_laws.hpp"
#include "errors.hpp"

namespace invopt {

class Grid {
public:
    explicit Grid(std::size_t n) : n_(n) {
        if (n < 3) throw Error(ErrorKind::GridTooSmall, "need n >= 3 nodes, got " + std::to_string(n));
        dx_ = 1.0 / static_cast<double>(n - 1);
    }

    std::size_t n() const noexcept { return n_; }
    double dx() const noexcept { return dx_; }
    double x(std::size_t i) const noexcept {
        return i + 1 == n_ ? 1.0 : static_cast<double>(i) * dx_;
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t n_;
    double dx_;
};

// Nodal values; values[0] is the actuated slot u(0) = v and values[n-1] = u(1) = 0.
struct StateField {
    Grid grid;
    std::vector<double> values;

    explicit StateField(Grid g) : grid(g), values(g.n(), 0.0) {}
    StateField(Grid g, std::vector<double> v) : grid(g), values(std::move(v)) {}

    double umax() const noexcept {
        double m = 0.0;
        for (double u : values) m = std::max(m, std::abs(u));
        return m;
    }
};

enum class PlantKind { quadratic_convection, counter_convection, linear_convection };
enum class ReactionKind { zero, linear };

struct ReactionSpec {
    ReactionKind kind = ReactionKind::zero;
    double lambda = 0.0;

    double gain() const noexcept { return kind == ReactionKind::linear ? lambda : 0.0; }
    friend bool operator==(const ReactionSpec&, const ReactionSpec&) = default;
};

struct PlantSpec {
    PlantKind kind = PlantKind::counter_convection;
    double eps = 1.0;
    ReactionSpec reaction{};
    friend bool operator==(const PlantSpec&, const PlantSpec&) = default;
};

constexpr std::string_view to_string(PlantKind k) noexcept {
    switch (k) {
    case PlantKind::quadratic_convection: return "quadratic_convection";
    case PlantKind::counter_convection: return "counter_convection";
    case PlantKind::linear_convection: return "linear_convection";
    }
    return "?";
}

constexpr std::string_view to_string(ReactionKind k) noexcept {
    return k == ReactionKind::zero ? "zero" : "linear";
}

inline ClfStructure structure_of(PlantKind k) noexcept {
    return k == PlantKind::quadratic_convection ? ClfStructure::cubic : ClfStructure::quadratic;
}

// e^{-(2/eps) x}
struct ExponentialWeight {
    double eps;
    double at(double x) const noexcept { return std::exp(-2.0 * x / eps); }
};

namespace detail {

inline double left_slope(std::span<const double> u, double dx) {
    if (u.size() < 3) throw Error(ErrorKind::GridTooSmall, "left_slope needs 3 nodes");
    return (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dx);
}

inline double quad_l2(std::span<const double> u, double dx, std::optional<ExponentialWeight> w) {
    const std::size_t n = u.size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double wi = w ? w->at(static_cast<double>(i) * dx) : 1.0;
        const double term = wi * u[i] * u[i];
        s += (i == 0 || i + 1 == n) ? 0.5 * term : term;
    }
    return s * dx;
}

inline double grad_sq_integral(std::span<const double> u, double dx, std::optional<ExponentialWeight> w) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < u.size(); ++i) {
        const double g = (u[i + 1] - u[i]) / dx;
        const double wi = w ? w->at((static_cast<double>(i) + 0.5) * dx) : 1.0;
        s += wi * g * g;
    }
    return s * dx;
}

inline ClfReadout clf_readout(std::span<const double> u, double dx, const PlantSpec& plant) {
    const double eps = plant.eps;
    const double lam = plant.reaction.gain();
    const double slope = left_slope(u, dx);
    switch (plant.kind) {
    case PlantKind::quadratic_convection: {
        const double l2 = quad_l2(u, dx, std::nullopt);
        return {0.75 * l2, 1.5 * (lam * l2 - eps * grad_sq_integral(u, dx, std::nullopt)), -1.5 * eps * slope};
    }
    case PlantKind::counter_convection: {
        const double l2 = quad_l2(u, dx, std::nullopt);
        return {l2, 2.0 * (lam * l2 - eps * grad_sq_integral(u, dx, std::nullopt)), -2.0 * eps * slope};
    }
    case PlantKind::linear_convection: {
        const ExponentialWeight w{eps};
        const double V = quad_l2(u, dx, w);
        const double phi = (2.0 / eps) * V + 2.0 * lam * V - 2.0 * eps * grad_sq_integral(u, dx, w);
        return {V, phi, -2.0 * eps * slope};
    }
    }
    return {};
}

} // namespace detail

inline double left_slope(const StateField& f) { return detail::left_slope(f.values, f.grid.dx()); }

inline double quad_l2(const StateField& f, std::optional<ExponentialWeight> w = std::nullopt) {
    return detail::quad_l2(f.values, f.grid.dx(), w);
}

inline double grad_sq_integral(const StateField& f, std::optional<ExponentialWeight> w = std::nullopt) {
    return detail::grad_sq_integral(f.values, f.grid.dx(), w);
}

inline ClfReadout clf_readout(const StateField& f, const PlantSpec& plant) {
    return detail::clf_readout(f.values, f.grid.dx(), plant);
}

// Time derivative at every node; both boundary entries are 0 (algebraic constraints).
inline void rhs_into(std::span<const double> u, double v, double dx, const PlantSpec& plant,
                     std::span<double> out) {
    const std::size_t n = u.size();
    out[0] = 0.0;
    out[n - 1] = 0.0;
    const double eps = plant.eps;
    const double lam = plant.reaction.gain();
    const double idx2 = 1.0 / (dx * dx);
    const double i2dx = 1.0 / (2.0 * dx);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double ul = i == 1 ? v : u[i - 1];
        const double ur = i + 2 == n ? 0.0 : u[i + 1];
        double d = eps * (ur - 2.0 * u[i] + ul) * idx2 + lam * u[i];
        switch (plant.kind) {
        case PlantKind::quadratic_convection: d -= (ur * ur - ul * ul) * i2dx; break;
        case PlantKind::counter_convection: d += (ur - ul) * i2dx; break;
        case PlantKind::linear_convection: d -= (ur - ul) * i2dx; break;
        }
        out[i] = d;
    }
}

inline StateField rhs(const StateField& f, double v, const PlantSpec& plant) {
    StateField out(f.grid);
    rhs_into(f.values, v, f.grid.dx(), plant, out.values);
    return out;
}

inline double stable_dt(const PlantSpec& plant, const Grid& grid, double umax) {
    constexpr double safety = 0.4;
    constexpr double tiny = 1e-300;
    const double dx = grid.dx();
    const double c_adv = plant.kind == PlantKind::quadratic_convection ? 2.0 * umax : 1.0;
    return safety * std::min(dx * dx / (2.0 * plant.eps), dx / std::max(c_adv, tiny));
}

// ---- initial conditions ----

enum class IcKind { zero, sine, bump, csv };

struct InitialCondition {
    IcKind kind = IcKind::sine;
    double amplitude = 1.0;
    std::string path;   // csv only
    std::string column; // csv only: header name or 0-based index
    friend bool operator==(const InitialCondition&, const InitialCondition&) = default;
};

constexpr std::string_view to_string(IcKind k) noexcept {
    switch (k) {
    case IcKind::zero: return "zero";
    case IcKind::sine: return "sine";
    case IcKind::bump: return "bump";
    case IcKind::csv: return "csv";
    }
    return "?";
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    return cells;
}

// Samples on a uniform grid of [0,1], read from one column of a CSV file.
inline std::vector<double> read_csv_column(const std::string& path, const std::string& column) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
    std::string line;
    std::vector<std::string> header;
    std::size_t col = 0;
    bool have_col = false;
    char* end = nullptr;
    const long as_index = column.empty() ? 0 : std::strtol(column.c_str(), &end, 10);
    if (column.empty() || (end && *end == '\0')) {
        col = static_cast<std::size_t>(as_index);
        have_col = true;
    }
    std::vector<double> vals;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (!have_col) {
            const auto it = std::find(cells.begin(), cells.end(), column);
            if (it == cells.end())
                throw Error(ErrorKind::ParseError, path + ":" + std::to_string(lineno) + ": no column '" + column + "'");
            col = static_cast<std::size_t>(it - cells.begin());
            have_col = true;
            continue;
        }
        if (col >= cells.size())
            throw Error(ErrorKind::ParseError, path + ":" + std::to_string(lineno) + ": missing column");
        char* e2 = nullptr;
        const double x = std::strtod(cells[col].c_str(), &e2);
        if (e2 == cells[col].c_str() || *e2 != '\0') {
            if (vals.empty() && lineno == 1) continue; // header row
            throw Error(ErrorKind::ParseError, path + ":" + std::to_string(lineno) + ": not a number");
        }
        vals.push_back(x);
    }
    if (vals.size() < 2) throw Error(ErrorKind::ParseError, path + ": need at least 2 samples");
    if (vals.back() != 0.0) throw Error(ErrorKind::ParseError, path + ": last sample must be 0 (u(1)=0)");
    return vals;
}

} // namespace detail

inline StateField make_initial_field(const InitialCondition& ic, const Grid& grid) {
    StateField f(grid);
    const std::size_t n = grid.n();
    constexpr double pi = 3.14159265358979323846;
    std::vector<double> samples;
    if (ic.kind == IcKind::csv) samples = detail::read_csv_column(ic.path, ic.column);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double x = grid.x(i);
        switch (ic.kind) {
        case IcKind::zero: f.values[i] = 0.0; break;
        case IcKind::sine: f.values[i] = ic.amplitude * std::sin(pi * x); break;
        case IcKind::bump: f.values[i] = ic.amplitude * x * (1.0 - x); break;
        case IcKind::csv: {
            // linear interpolation of uniformly spaced samples
            const double pos = x * static_cast<double>(samples.size() - 1);
            const std::size_t k = std::min(static_cast<std::size_t>(pos), samples.size() - 2);
            const double w = pos - static_cast<double>(k);
            f.values[i] = (1.0 - w) * samples[k] + w * samples[k + 1];
            break;
        }
        }
    }
    f.values[n - 1] = 0.0;
    return f;
}

} // namespace invopt
