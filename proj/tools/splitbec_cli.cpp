#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <splitbec/splitbec.hpp>

using namespace splitbec;

namespace {

enum ExitCode { ok = 0, validation = 2, convergence = 3, numerical = 4, check_failed = 5 };

int exit_code(ErrorKind k) {
    switch (k) {
    case ErrorKind::validation: return validation;
    case ErrorKind::empty_sector: return validation;
    case ErrorKind::convergence: return convergence;
    case ErrorKind::numerical: return numerical;
    }
    return numerical;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct SweepFlags {
    std::string config;
    std::string out;
    std::string json;
    int workers = 1;
    std::optional<int> n_max;
    std::optional<std::string> sector;
    std::optional<double> gy;
    std::optional<double> gz;
    bool optimize_g = false;
    std::optional<std::string> negativity;
    bool timestamp = false;
};

void add_sweep_flags(CLI::App* app, SweepFlags& f) {
    app->add_option("--config", f.config, "Sweep configuration (key = value lines)")->check(CLI::ExistingFile);
    app->add_option("--out", f.out, "CSV output path (default: stdout)");
    app->add_option("--json", f.json, "Also write the table as JSON to this path");
    app->add_option("--workers", f.workers, "Worker threads for grid points")->check(CLI::PositiveNumber);
    app->add_option("--n-max", f.n_max, "Override the occupation cutoff per mode");
    app->add_option("--sector", f.sector, "Sector policy: max, all or a fixed N");
    app->add_option("--gy", f.gy, "GMVT gain on S1^y");
    app->add_option("--gz", f.gz, "GMVT gain on S1^z");
    app->add_flag("--optimize-g", f.optimize_g, "Minimize GMVT over a 25 x 25 log grid of gains in [0.2, 5]");
    app->add_option("--negativity", f.negativity, "Negativity mode: local-number-resolved or coherent");
    app->add_flag("--timestamp", f.timestamp, "Record the run time in the output header");
}

SweepSpec build_spec(Command command, const SweepFlags& f) {
    SweepSpec s = default_spec(command);
    if (!f.config.empty()) {
        s = load_config(f.config, command);
        if (s.command != command)
            fail(ErrorKind::validation, std::string("invalid value for 'command': config is for '") +
                                            to_string(s.command) + "', not '" + to_string(command) + "'");
    }
    if (f.n_max) apply_config_entry(s, "n_max", std::to_string(*f.n_max));
    if (f.sector) apply_config_entry(s, "sector", *f.sector);
    if (f.gy) s.criteria.gy = *f.gy;
    if (f.gz) s.criteria.gz = *f.gz;
    if (f.optimize_g) s.criteria.optimize_g = true;
    if (f.negativity) apply_config_entry(s, "negativity", *f.negativity);
    validate_spec(s);
    return s;
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") std::cout << text;
    else detail::write_text(path, text);
}

int run_sweep_command(Command command, const SweepFlags& f) {
    const SweepSpec spec = build_spec(command, f);
    const ResultTable table = run_command(spec, f.workers);
    TableMetadata meta;
    if (f.timestamp) meta.timestamp = utc_timestamp();
    write_output(f.out, table_to_csv(table, meta));
    if (!f.json.empty()) emit_table_json(table, f.json, meta);
    for (const auto& row : table.rows)
        if (!row.converged) {
            std::fprintf(stderr, "error: some points did not reach the steady-state tolerance (flagged 'nonconverged')\n");
            return convergence;
        }
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Steady states, splitting and entanglement of a driven two-mode condensate"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    SweepFlags grid_flags, sector_flags, sweep_flags;
    auto* grid = app.add_subcommand("negativity-grid", "Logarithmic negativity over a two-parameter grid");
    add_sweep_flags(grid, grid_flags);
    auto* by_sector = app.add_subcommand("criteria-vs-sector", "Criteria for every populated sector of one point");
    add_sweep_flags(by_sector, sector_flags);
    auto* sweep = app.add_subcommand("criteria-sweep", "Criteria along one parameter axis");
    add_sweep_flags(sweep, sweep_flags);

    auto* steady = app.add_subcommand("steady-state", "Solve one parameter point and dump the density matrix");
    SimParams sp;
    std::string steady_out, dist_out, split_out;
    int split_n = -1;
    double tol = 1e-9, t_max = 200.0, dt = 0.01;
    bool direct = false;
    steady->add_option("--delta", sp.delta, "Detuning");
    steady->add_option("--amp", sp.amp, "Pump amplitude");
    steady->add_option("--theta-a", sp.theta_a, "Pump phase of mode a");
    steady->add_option("--theta-b", sp.theta_b, "Pump phase of mode b");
    steady->add_option("--u", sp.u, "Same-spin interaction");
    steady->add_option("--v", sp.v, "Cross-spin interaction");
    steady->add_option("--gamma", sp.gamma, "Loss rate");
    steady->add_option("--n-max", sp.n_max, "Occupation cutoff per mode");
    steady->add_option("--tol", tol, "Relative residual tolerance");
    steady->add_option("--t-max", t_max, "Integration time limit");
    steady->add_option("--dt", dt, "Integrator step");
    steady->add_flag("--direct", direct, "Use the dense Liouvillian null space instead of time evolution");
    steady->add_option("--out", steady_out, "Matrix file (JSON)")->required();
    steady->add_option("--distribution", dist_out, "Sector distribution CSV");
    steady->add_option("--split-sector", split_n, "Also write the split density of this sector");
    steady->add_option("--split-out", split_out, "Path for --split-sector output");

    auto* check = app.add_subcommand("check", "Run the invariant suites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : validation;
    }

    try {
        if (grid->parsed()) return run_sweep_command(Command::negativity_grid, grid_flags);
        if (by_sector->parsed()) return run_sweep_command(Command::criteria_vs_sector, sector_flags);
        if (sweep->parsed()) return run_sweep_command(Command::criteria_sweep, sweep_flags);
        if (steady->parsed()) {
            sp.validate();
            std::optional<TwoModeState> state;
            bool converged = true;
            if (direct) {
                state = steady_state_direct(sp);
            } else {
                EvolveOptions opt;
                opt.tol = tol;
                opt.t_max = t_max;
                opt.dt = dt;
                const SteadyState ss = evolve_to_steady(sp, TwoModeState::vacuum(sp.cutoff()), opt);
                if (!ss.converged) std::fprintf(stderr, "error: residual %.3e above tolerance at t_max\n", ss.residual);
                converged = ss.converged;
                state = ss.state;
            }
            save_matrix_file(steady_out, to_json(*state, sp));
            if (!dist_out.empty()) detail::write_text(dist_out, distribution_csv(sector_distribution(*state)));
            if (split_n >= 0) {
                require(!split_out.empty(), "--split-sector needs --split-out");
                save_matrix_file(split_out, to_json(split_sector_density(*state, split_n)));
            }
            std::printf("boundary_population %.6e\n", boundary_population(*state));
            return converged ? ok : convergence;
        }
        if (check->parsed()) {
            bool all = true;
            for (const auto& r : run_invariant_checks()) {
                std::printf("%s  %-68s %.3e <= %.1e\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.value, r.bound);
                all = all && r.passed;
            }
            return all ? ok : check_failed;
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return numerical;
    }
    return ok;
}
