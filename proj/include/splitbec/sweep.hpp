#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "common.hpp"
#include "entangle.hpp"
#include "liouville.hpp"
#include "matrix_io.hpp"
#include "sector.hpp"

namespace splitbec {

inline constexpr double kTruncationSuspect = 1e-2;

/// Linear axis over one SimParams field.
struct SweepAxis {
    std::string name;
    double start = 0.0;
    double stop = 0.0;
    int count = 1;

    std::vector<double> values() const {
        std::vector<double> v;
        for (int i = 0; i < count; ++i)
            v.push_back(count == 1 ? start : (i == count - 1 ? stop : start + (stop - start) * i / (count - 1)));
        return v;
    }

    friend bool operator==(const SweepAxis&, const SweepAxis&) = default;
};

struct SectorPolicy {
    enum class Kind { max, all, fixed };
    Kind kind = Kind::max;
    int n = 0;             // fixed sector
    int n_cap = -1;        // highest sector for `all`; -1 means 2 n_max
    bool exclude_vacuum = true;

    friend bool operator==(const SectorPolicy&, const SectorPolicy&) = default;
};

enum class Output { negativity, gmvt, dgcz, ht, p_n, boundary_population };

inline const std::vector<std::pair<Output, std::string>>& output_names() {
    static const std::vector<std::pair<Output, std::string>> names{
        {Output::negativity, "negativity"}, {Output::gmvt, "gmvt"}, {Output::dgcz, "dgcz"},
        {Output::ht, "ht"},                 {Output::p_n, "p_n"},   {Output::boundary_population, "boundary_population"}};
    return names;
}

enum class Command { negativity_grid, criteria_vs_sector, criteria_sweep };

inline const char* to_string(Command c) {
    switch (c) {
    case Command::negativity_grid: return "negativity-grid";
    case Command::criteria_vs_sector: return "criteria-vs-sector";
    case Command::criteria_sweep: return "criteria-sweep";
    }
    return "";
}

inline Command parse_command(const std::string& s) {
    for (Command c : {Command::negativity_grid, Command::criteria_vs_sector, Command::criteria_sweep})
        if (s == to_string(c)) return c;
    fail(ErrorKind::validation, "invalid value for 'command': '" + s + "'");
}

struct SweepSpec {
    Command command = Command::negativity_grid;
    SimParams base;
    std::optional<SweepAxis> axis1;
    std::optional<SweepAxis> axis2;
    SectorPolicy sector;
    std::set<Output> outputs;
    CriterionOptions criteria;
    double tol = 1e-9;
    double t_max = 200.0;
    double dt = 0.01;

    bool wants(Output o) const { return outputs.count(o) > 0; }
    bool wants_criteria() const { return wants(Output::gmvt) || wants(Output::dgcz) || wants(Output::ht); }

    friend bool operator==(const SweepSpec& x, const SweepSpec& y) {
        return x.command == y.command && x.base == y.base && x.axis1 == y.axis1 && x.axis2 == y.axis2 &&
               x.sector == y.sector && x.outputs == y.outputs && x.criteria.gy == y.criteria.gy &&
               x.criteria.gz == y.criteria.gz && x.criteria.optimize_g == y.criteria.optimize_g &&
               x.criteria.negativity == y.criteria.negativity && x.tol == y.tol && x.t_max == y.t_max && x.dt == y.dt;
    }
};

inline std::set<Output> default_outputs(Command c) {
    if (c == Command::negativity_grid) return {Output::negativity, Output::p_n, Output::boundary_population};
    std::set<Output> all;
    for (const auto& [o, name] : output_names()) all.insert(o);
    return all;
}

inline SweepSpec default_spec(Command c) {
    SweepSpec s;
    s.command = c;
    s.outputs = default_outputs(c);
    if (c == Command::criteria_vs_sector) s.sector.kind = SectorPolicy::Kind::all;
    return s;
}

// ---------------------------------------------------------------------------
// Config files: one `key = value` per line, `#` starts a comment.

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        if (!std::isfinite(x)) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        fail(ErrorKind::validation, "invalid value for '" + key + "': expected a finite number, got '" + v + "'");
    }
}

inline int parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long x = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return static_cast<int>(x);
    } catch (const std::exception&) {
        fail(ErrorKind::validation, "invalid value for '" + key + "': expected an integer, got '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(ErrorKind::validation, "invalid value for '" + key + "': expected true or false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(v);
    while (std::getline(ss, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline const std::vector<std::string>& param_names() {
    static const std::vector<std::string> names{"delta", "amp", "theta_a", "theta_b", "u", "v", "gamma", "n_max"};
    return names;
}

inline bool is_param(const std::string& name) {
    const auto& n = param_names();
    return std::find(n.begin(), n.end(), name) != n.end();
}

inline void set_param(SimParams& p, const std::string& name, double value) {
    if (name == "delta") p.delta = value;
    else if (name == "amp") p.amp = value;
    else if (name == "theta_a") p.theta_a = value;
    else if (name == "theta_b") p.theta_b = value;
    else if (name == "u") p.u = value;
    else if (name == "v") p.v = value;
    else if (name == "gamma") p.gamma = value;
    else if (name == "n_max") {
        if (value != std::floor(value)) fail(ErrorKind::validation, "invalid value for 'n_max': must be an integer");
        p.n_max = static_cast<int>(value);
    } else fail(ErrorKind::validation, "unknown parameter '" + name + "'");
}

inline double get_param(const SimParams& p, const std::string& name) {
    if (name == "delta") return p.delta;
    if (name == "amp") return p.amp;
    if (name == "theta_a") return p.theta_a;
    if (name == "theta_b") return p.theta_b;
    if (name == "u") return p.u;
    if (name == "v") return p.v;
    if (name == "gamma") return p.gamma;
    if (name == "n_max") return p.n_max;
    fail(ErrorKind::validation, "unknown parameter '" + name + "'");
}

inline SweepAxis parse_axis(const std::string& key, const std::string& v) {
    const auto parts = split_list(v, ' ');
    if (parts.size() != 4)
        fail(ErrorKind::validation, "invalid value for '" + key + "': expected 'name start stop count'");
    SweepAxis a;
    a.name = parts[0];
    if (!is_param(a.name)) fail(ErrorKind::validation, "invalid value for '" + key + "': unknown parameter '" + a.name + "'");
    a.start = parse_double(key, parts[1]);
    a.stop = parse_double(key, parts[2]);
    a.count = parse_int(key, parts[3]);
    if (a.count < 1) fail(ErrorKind::validation, "invalid value for '" + key + "': count must be >= 1");
    return a;
}

inline std::string axis_string(const SweepAxis& a) {
    return a.name + " " + format_double(a.start) + " " + format_double(a.stop) + " " + std::to_string(a.count);
}

// Re-raises a SimParams validation failure with the offending key up front.
inline void validate_params(const SimParams& p) {
    try {
        p.validate();
    } catch (const Error& e) {
        const std::string msg = e.what();
        const auto key = msg.substr(0, msg.find(' '));
        fail(ErrorKind::validation, "invalid value for '" + key + "': " + msg);
    }
}

} // namespace detail

inline void validate_spec(const SweepSpec& s) {
    detail::validate_params(s.base);
    for (const auto* axis : {&s.axis1, &s.axis2}) {
        if (!*axis) continue;
        for (double x : (*axis)->values()) {
            SimParams p = s.base;
            detail::set_param(p, (*axis)->name, x);
            detail::validate_params(p);
        }
    }
    if (s.axis2 && !s.axis1) fail(ErrorKind::validation, "invalid value for 'axis2': requires axis1");
    if (s.axis1 && s.axis2 && s.axis1->name == s.axis2->name)
        fail(ErrorKind::validation, "invalid value for 'axis2': same parameter as axis1");
    if (s.sector.kind == SectorPolicy::Kind::fixed && s.sector.n < 0)
        fail(ErrorKind::validation, "invalid value for 'sector': N must be >= 0");
    if (s.sector.n_cap < -1) fail(ErrorKind::validation, "invalid value for 'n_cap': must be >= 0");
    if (s.criteria.gy == 0.0) fail(ErrorKind::validation, "invalid value for 'gy': must be nonzero");
    if (s.criteria.gz == 0.0) fail(ErrorKind::validation, "invalid value for 'gz': must be nonzero");
    if (!(s.tol > 0.0)) fail(ErrorKind::validation, "invalid value for 'tol': must be > 0");
    if (!(s.t_max > 0.0)) fail(ErrorKind::validation, "invalid value for 't_max': must be > 0");
    if (!(s.dt > 0.0)) fail(ErrorKind::validation, "invalid value for 'dt': must be > 0");
}

/// Applies one `key = value` pair.
inline void apply_config_entry(SweepSpec& s, const std::string& key, const std::string& v) {
    using detail::parse_double;
    if (key == "command") {
        s.command = parse_command(v);
    } else if (detail::is_param(key)) {
        if (key == "n_max") s.base.n_max = detail::parse_int(key, v);
        else detail::set_param(s.base, key, parse_double(key, v));
    } else if (key == "axis1") {
        s.axis1 = detail::parse_axis(key, v);
    } else if (key == "axis2") {
        s.axis2 = detail::parse_axis(key, v);
    } else if (key == "sector") {
        if (v == "max") s.sector.kind = SectorPolicy::Kind::max;
        else if (v == "all") s.sector.kind = SectorPolicy::Kind::all;
        else {
            s.sector.kind = SectorPolicy::Kind::fixed;
            s.sector.n = detail::parse_int(key, v);
        }
    } else if (key == "n_cap") {
        s.sector.n_cap = detail::parse_int(key, v);
    } else if (key == "exclude_vacuum") {
        s.sector.exclude_vacuum = detail::parse_bool(key, v);
    } else if (key == "gy") {
        s.criteria.gy = parse_double(key, v);
    } else if (key == "gz") {
        s.criteria.gz = parse_double(key, v);
    } else if (key == "optimize_g") {
        s.criteria.optimize_g = detail::parse_bool(key, v);
    } else if (key == "negativity") {
        try {
            s.criteria.negativity = parse_negativity_mode(v);
        } catch (const Error&) {
            fail(ErrorKind::validation, "invalid value for 'negativity': '" + v + "'");
        }
    } else if (key == "outputs") {
        s.outputs.clear();
        for (const auto& item : detail::split_list(v, ',')) {
            bool found = false;
            for (const auto& [o, name] : output_names())
                if (name == item) {
                    s.outputs.insert(o);
                    found = true;
                }
            if (!found) fail(ErrorKind::validation, "invalid value for 'outputs': unknown output '" + item + "'");
        }
        s.outputs.insert(Output::boundary_population);
    } else if (key == "tol") {
        s.tol = parse_double(key, v);
    } else if (key == "t_max") {
        s.t_max = parse_double(key, v);
    } else if (key == "dt") {
        s.dt = parse_double(key, v);
    } else {
        fail(ErrorKind::validation, "unknown key '" + key + "'");
    }
}

/// Parses config text. `command` and `outputs` fall back to the defaults of `fallback`.
inline SweepSpec parse_config(const std::string& text, Command fallback = Command::negativity_grid) {
    std::vector<std::pair<std::string, std::string>> entries;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::optional<Command> command;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(ErrorKind::validation, "config line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key == "command") command = parse_command(value);
        entries.emplace_back(key, value);
    }
    SweepSpec s = default_spec(command.value_or(fallback));
    std::set<std::string> seen;
    for (const auto& [key, value] : entries) {
        if (!seen.insert(key).second) fail(ErrorKind::validation, "duplicate key '" + key + "'");
        apply_config_entry(s, key, value);
    }
    validate_spec(s);
    return s;
}

inline SweepSpec load_config(const std::string& path, Command fallback = Command::negativity_grid) {
    return parse_config(detail::read_text(path), fallback);
}

/// Complete `key = value` listing of a spec; parse_config of these lines reproduces it.
inline std::vector<std::string> config_lines(const SweepSpec& s) {
    using detail::format_double;
    std::vector<std::string> out;
    out.push_back(std::string("command = ") + to_string(s.command));
    for (const auto& name : detail::param_names())
        out.push_back(name + " = " + (name == "n_max" ? std::to_string(s.base.n_max)
                                                      : format_double(detail::get_param(s.base, name))));
    if (s.axis1) out.push_back("axis1 = " + detail::axis_string(*s.axis1));
    if (s.axis2) out.push_back("axis2 = " + detail::axis_string(*s.axis2));
    switch (s.sector.kind) {
    case SectorPolicy::Kind::max: out.push_back("sector = max"); break;
    case SectorPolicy::Kind::all: out.push_back("sector = all"); break;
    case SectorPolicy::Kind::fixed: out.push_back("sector = " + std::to_string(s.sector.n)); break;
    }
    out.push_back("n_cap = " + std::to_string(s.sector.n_cap));
    out.push_back(std::string("exclude_vacuum = ") + (s.sector.exclude_vacuum ? "true" : "false"));
    out.push_back("gy = " + format_double(s.criteria.gy));
    out.push_back("gz = " + format_double(s.criteria.gz));
    out.push_back(std::string("optimize_g = ") + (s.criteria.optimize_g ? "true" : "false"));
    out.push_back(std::string("negativity = ") + to_string(s.criteria.negativity));
    std::string outs;
    for (const auto& [o, name] : output_names())
        if (s.wants(o)) outs += (outs.empty() ? "" : ",") + name;
    out.push_back("outputs = " + outs);
    out.push_back("tol = " + format_double(s.tol));
    out.push_back("t_max = " + format_double(s.t_max));
    out.push_back("dt = " + format_double(s.dt));
    return out;
}

/// Recovers the sweep specification from the `# config:` lines of an emitted CSV.
inline SweepSpec spec_from_table_text(const std::string& csv) {
    static const std::string tag = "# config: ";
    std::string text;
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line))
        if (line.rfind(tag, 0) == 0) text += line.substr(tag.size()) + "\n";
    return parse_config(text);
}

// ---------------------------------------------------------------------------
// Running sweeps

struct ResultRow {
    std::vector<double> axis_values;
    int n = 0;
    bool n_changed = false; // criteria-sweep: selected sector differs from the previous point
    bool evaluated = false; // sector present and quantities computed
    double p_n = 0.0;
    double log_neg = std::nan("");
    CriterionReport report;
    bool has_criteria = false;
    double boundary = 0.0;
    bool converged = false;
    double residual = 0.0;
    std::vector<std::string> flags;
};

struct ResultTable {
    SweepSpec spec;
    std::vector<std::string> axis_names;
    std::vector<ResultRow> rows;
};

/// Steady state of one parameter point with the sweep's integrator settings.
inline SteadyState solve_point(const SweepSpec& s, const SimParams& p) {
    EvolveOptions opt;
    opt.tol = s.tol;
    opt.t_max = s.t_max;
    opt.dt = s.dt;
    return evolve_to_steady(p, TwoModeState::vacuum(p.cutoff()), opt);
}

/// Sectors selected by the policy for one steady state.
inline std::vector<int> select_sectors(const SectorPolicy& policy, const SectorDistribution& dist, int n_max,
                                       std::vector<std::string>& flags) {
    switch (policy.kind) {
    case SectorPolicy::Kind::max: {
        const int n = max_prob_sector(dist, policy.exclude_vacuum);
        if (n == 0 && policy.exclude_vacuum) flags.push_back("vacuum-fallback");
        return {n};
    }
    case SectorPolicy::Kind::fixed: return {policy.n};
    case SectorPolicy::Kind::all: {
        const int cap = policy.n_cap < 0 ? 2 * n_max : std::min(policy.n_cap, 2 * n_max);
        std::vector<int> out;
        for (int n = policy.exclude_vacuum ? 1 : 0; n <= cap; ++n)
            if (dist.prob(n) >= kEmptySectorFloor) out.push_back(n);
        return out;
    }
    }
    return {};
}

inline ResultRow evaluate_row(const SweepSpec& s, const TwoModeState& state, int n, const SectorDistribution& dist) {
    ResultRow row;
    row.n = n;
    row.p_n = dist.prob(n);
    if (n < 0 || n > 2 * state.cutoff.n_max() || row.p_n < kEmptySectorFloor) {
        row.flags.push_back("empty-sector");
        return row;
    }
    row.evaluated = true;
    if (s.wants_criteria() && n >= 1) {
        CriterionOptions opt = s.criteria;
        if (!s.wants(Output::negativity)) opt.negativity = NegativityMode::local_number_resolved;
        row.report = evaluate_sector(state, n, opt);
        row.has_criteria = true;
        if (s.wants(Output::negativity)) row.log_neg = row.report.log_neg;
        if (row.report.gmvt.degenerate) row.flags.push_back("gmvt-degenerate");
        if (row.report.dgcz.degenerate) row.flags.push_back("dgcz-degenerate");
        if (row.report.ht.degenerate) row.flags.push_back("ht-degenerate");
    } else if (s.wants(Output::negativity)) {
        row.log_neg = logarithmic_negativity(state, n, s.criteria.negativity);
    }
    if (s.wants_criteria() && n == 0) row.flags.push_back("criteria-undefined");
    return row;
}

/// Called once per grid point with the point index and its steady state. May run on
/// any worker thread.
using PointObserver = std::function<void(std::size_t, const SimParams&, const SteadyState&)>;

/// Runs every grid point on `workers` threads. Rows come back in grid order
/// (axis1 outer, axis2 inner, then ascending N) regardless of scheduling.
inline ResultTable run_sweep(const SweepSpec& s, int workers = 1, const PointObserver& observer = {}) {
    validate_spec(s);
    require(workers >= 1, "workers must be >= 1");
    std::vector<std::vector<double>> points;
    ResultTable table;
    table.spec = s;
    const std::vector<double> v1 = s.axis1 ? s.axis1->values() : std::vector<double>{};
    const std::vector<double> v2 = s.axis2 ? s.axis2->values() : std::vector<double>{};
    if (s.axis1) table.axis_names.push_back(s.axis1->name);
    if (s.axis2) table.axis_names.push_back(s.axis2->name);
    if (!s.axis1) points.push_back({});
    else if (!s.axis2)
        for (double x : v1) points.push_back({x});
    else
        for (double x : v1)
            for (double y : v2) points.push_back({x, y});

    std::vector<std::vector<ResultRow>> results(points.size());
    std::vector<std::exception_ptr> errors(points.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < points.size(); i = next++) {
            try {
                SimParams p = s.base;
                for (std::size_t a = 0; a < points[i].size(); ++a) detail::set_param(p, table.axis_names[a], points[i][a]);
                const SteadyState ss = solve_point(s, p);
                if (observer) observer(i, p, ss);
                const SectorDistribution dist = sector_distribution(ss.state);
                std::vector<std::string> point_flags;
                if (!ss.converged) point_flags.push_back("nonconverged");
                const double boundary = boundary_population(ss.state);
                if (boundary > kTruncationSuspect) point_flags.push_back("truncation-suspect");
                std::vector<std::string> select_flags;
                for (int n : select_sectors(s.sector, dist, p.n_max, select_flags)) {
                    ResultRow row = evaluate_row(s, ss.state, n, dist);
                    row.axis_values = points[i];
                    row.boundary = boundary;
                    row.converged = ss.converged;
                    row.residual = ss.residual;
                    std::vector<std::string> flags = point_flags;
                    flags.insert(flags.end(), select_flags.begin(), select_flags.end());
                    flags.insert(flags.end(), row.flags.begin(), row.flags.end());
                    row.flags = flags;
                    results[i].push_back(std::move(row));
                }
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int threads = std::min<int>(workers, static_cast<int>(points.size()));
    if (threads <= 1) work();
    else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    for (auto& r : results)
        for (auto& row : r) table.rows.push_back(std::move(row));
    if (s.command == Command::criteria_sweep)
        for (std::size_t i = 1; i < table.rows.size(); ++i) table.rows[i].n_changed = table.rows[i].n != table.rows[i - 1].n;
    return table;
}

inline ResultTable run_negativity_grid(SweepSpec s, int workers = 1, const PointObserver& observer = {}) {
    s.command = Command::negativity_grid;
    if (!s.axis1 || !s.axis2) fail(ErrorKind::validation, "negativity-grid needs axis1 and axis2");
    return run_sweep(s, workers, observer);
}

inline ResultTable run_criteria_vs_sector(SweepSpec s, int workers = 1, const PointObserver& observer = {}) {
    s.command = Command::criteria_vs_sector;
    if (s.axis1) fail(ErrorKind::validation, "criteria-vs-sector runs at a single parameter point; remove axis1");
    return run_sweep(s, workers, observer);
}

inline ResultTable run_criteria_sweep(SweepSpec s, int workers = 1, const PointObserver& observer = {}) {
    s.command = Command::criteria_sweep;
    if (!s.axis1 || s.axis2) fail(ErrorKind::validation, "criteria-sweep needs exactly one axis (axis1)");
    if (s.sector.kind == SectorPolicy::Kind::all)
        fail(ErrorKind::validation, "invalid value for 'sector': criteria-sweep records one sector per point");
    return run_sweep(s, workers, observer);
}

inline ResultTable run_command(const SweepSpec& s, int workers = 1, const PointObserver& observer = {}) {
    switch (s.command) {
    case Command::negativity_grid: return run_negativity_grid(s, workers, observer);
    case Command::criteria_vs_sector: return run_criteria_vs_sector(s, workers, observer);
    case Command::criteria_sweep: return run_criteria_sweep(s, workers, observer);
    }
    return {};
}

// ---------------------------------------------------------------------------
// Staircase analysis

/// Indices i of steps v[i] -> v[i+1] larger than `factor` times the local step size,
/// the median |step| over the window [i-3, i+3] without step i, floored at `floor`.
inline std::vector<int> find_jumps(const std::vector<double>& v, double factor = 10.0, double floor = 1e-6) {
    std::vector<int> out;
    if (v.size() < 3) return out;
    const int m = static_cast<int>(v.size()) - 1;
    std::vector<double> d(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) d[static_cast<std::size_t>(j)] = std::abs(v[static_cast<std::size_t>(j) + 1] - v[static_cast<std::size_t>(j)]);
    for (int i = 0; i < m; ++i) {
        std::vector<double> w;
        for (int j = std::max(0, i - 3); j <= std::min(m - 1, i + 3); ++j)
            if (j != i) w.push_back(d[static_cast<std::size_t>(j)]);
        std::sort(w.begin(), w.end());
        double med = w.empty() ? 0.0
                               : (w.size() % 2 ? w[w.size() / 2] : 0.5 * (w[w.size() / 2 - 1] + w[w.size() / 2]));
        med = std::max(med, floor);
        if (d[static_cast<std::size_t>(i)] > factor * med) out.push_back(i);
    }
    return out;
}

/// Jumps in `values` that do not coincide with a change of the selected sector.
inline std::vector<int> staircase_violations(const std::vector<double>& values, const std::vector<int>& sectors,
                                             double factor = 10.0, double floor = 1e-6) {
    require(values.size() == sectors.size(), "staircase: values and sectors differ in length");
    std::vector<int> out;
    for (int i : find_jumps(values, factor, floor))
        if (sectors[static_cast<std::size_t>(i)] == sectors[static_cast<std::size_t>(i) + 1]) out.push_back(i);
    return out;
}

// ---------------------------------------------------------------------------
// Output

struct TableMetadata {
    std::string timestamp; // empty: omitted, keeping output byte-identical across runs
};

namespace detail {

inline std::string cell(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

inline std::string join(const std::vector<std::string>& v, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
    return out;
}

struct Column {
    std::string name;
    std::function<std::string(const ResultRow&)> value;
};

inline std::vector<Column> table_columns(const ResultTable& t) {
    const SweepSpec& s = t.spec;
    std::vector<Column> cols;
    for (std::size_t a = 0; a < t.axis_names.size(); ++a)
        cols.push_back({t.axis_names[a], [a](const ResultRow& r) { return cell(r.axis_values[a]); }});
    cols.push_back({"N", [](const ResultRow& r) { return std::to_string(r.n); }});
    if (s.command == Command::criteria_sweep)
        cols.push_back({"N_changed", [](const ResultRow& r) { return std::string(r.n_changed ? "1" : "0"); }});
    if (s.wants(Output::p_n)) cols.push_back({"p_N", [](const ResultRow& r) { return cell(r.p_n); }});
    auto crit = [](auto get) {
        return [get](const ResultRow& r) { return r.has_criteria ? cell(get(r.report)) : std::string("nan"); };
    };
    if (s.wants(Output::negativity)) {
        cols.push_back({"E", [](const ResultRow& r) { return r.evaluated ? cell(r.log_neg) : std::string("nan"); }});
        cols.push_back({"E_max", [](const ResultRow& r) { return cell(max_log_negativity(r.n)); }});
    }
    if (s.wants(Output::gmvt)) {
        cols.push_back({"gmvt", crit([](const CriterionReport& c) { return c.gmvt.value; })});
        cols.push_back({"gy", crit([](const CriterionReport& c) { return c.gy; })});
        cols.push_back({"gz", crit([](const CriterionReport& c) { return c.gz; })});
    }
    if (s.wants(Output::dgcz)) cols.push_back({"dgcz", crit([](const CriterionReport& c) { return c.dgcz.value; })});
    if (s.wants(Output::ht)) cols.push_back({"ht", crit([](const CriterionReport& c) { return c.ht.value; })});
    if (s.wants_criteria()) {
        cols.push_back({"mean_s1x", crit([](const CriterionReport& c) { return c.components.mean_s1x; })});
        cols.push_back({"mean_s2x", crit([](const CriterionReport& c) { return c.components.mean_s2x; })});
        cols.push_back({"var_x_sum", crit([](const CriterionReport& c) { return c.components.var_x_sum; })});
        cols.push_back({"var_y_diff", crit([](const CriterionReport& c) { return c.components.var_y_diff; })});
        cols.push_back({"var_z_sum", crit([](const CriterionReport& c) { return c.components.var_z_sum; })});
        cols.push_back({"var_y_gain", crit([](const CriterionReport& c) { return c.components.var_y_gain; })});
        cols.push_back({"var_z_gain", crit([](const CriterionReport& c) { return c.components.var_z_gain; })});
    }
    cols.push_back({"boundary_population", [](const ResultRow& r) { return cell(r.boundary); }});
    cols.push_back({"residual", [](const ResultRow& r) { return cell(r.residual); }});
    cols.push_back({"converged", [](const ResultRow& r) { return std::string(r.converged ? "1" : "0"); }});
    cols.push_back({"flags", [](const ResultRow& r) { return join(r.flags, ";"); }});
    return cols;
}

// Numeric cells become JSON numbers, nan becomes null, anything else stays text.
inline nlohmann::json json_cell(const std::string& text) {
    if (text == "nan") return nullptr;
    if (text == "inf" || text == "-inf") return text;
    char* end = nullptr;
    const double x = std::strtod(text.c_str(), &end);
    if (!text.empty() && end == text.c_str() + text.size()) return x;
    return text;
}

inline std::string policy_string(const SectorPolicy& p) {
    std::string s = p.kind == SectorPolicy::Kind::max ? "max" : p.kind == SectorPolicy::Kind::all ? "all" : std::to_string(p.n);
    return s + (p.exclude_vacuum ? " (vacuum excluded)" : " (vacuum included)");
}

} // namespace detail

inline std::string table_to_csv(const ResultTable& t, const TableMetadata& meta = {}) {
    std::string out;
    out += std::string("# splitbec ") + kVersion + "\n";
    out += std::string("# command: ") + to_string(t.spec.command) + "\n";
    out += std::string("# negativity: ") + to_string(t.spec.criteria.negativity) + "\n";
    out += "# sector-policy: " + detail::policy_string(t.spec.sector) + "\n";
    if (!meta.timestamp.empty()) out += "# timestamp: " + meta.timestamp + "\n";
    for (const auto& line : config_lines(t.spec)) out += "# config: " + line + "\n";
    const auto cols = detail::table_columns(t);
    std::vector<std::string> names;
    for (const auto& c : cols) names.push_back(c.name);
    out += detail::join(names, ",") + "\n";
    for (const auto& row : t.rows) {
        std::vector<std::string> cells;
        for (const auto& c : cols) cells.push_back(c.value(row));
        out += detail::join(cells, ",") + "\n";
    }
    return out;
}

inline nlohmann::json table_to_json(const ResultTable& t, const TableMetadata& meta = {}) {
    nlohmann::json j;
    j["version"] = kVersion;
    j["command"] = to_string(t.spec.command);
    j["negativity"] = to_string(t.spec.criteria.negativity);
    j["sector_policy"] = detail::policy_string(t.spec.sector);
    if (!meta.timestamp.empty()) j["timestamp"] = meta.timestamp;
    j["config"] = config_lines(t.spec);
    const auto cols = detail::table_columns(t);
    nlohmann::json names = nlohmann::json::array();
    for (const auto& c : cols) names.push_back(c.name);
    j["columns"] = names;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : t.rows) {
        nlohmann::json r = nlohmann::json::array();
        for (const auto& c : cols) r.push_back(detail::json_cell(c.value(row)));
        rows.push_back(r);
    }
    j["rows"] = rows;
    return j;
}

inline void emit_table(const ResultTable& t, const std::string& path, const TableMetadata& meta = {}) {
    detail::write_text(path, table_to_csv(t, meta));
}

inline void emit_table_json(const ResultTable& t, const std::string& path, const TableMetadata& meta = {}) {
    detail::write_text(path, table_to_json(t, meta).dump(2) + "\n");
}

} // namespace splitbec
