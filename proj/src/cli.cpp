#include "n1plus/cli.hpp"

#include "n1plus/bench.hpp"
#include "n1plus/dynamics.hpp"
#include "n1plus/error.hpp"
#include "n1plus/grid.hpp"
#include "n1plus/indicators.hpp"
#include "n1plus/report.hpp"
#include "n1plus/risk.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace n1plus {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Globals {
    std::string grid;
    std::uint64_t seed = 1;
    double horizon = 20.0;
    double dt = 0.01;
    std::string out_dir = ".";
    std::string format = "csv";
};

struct SimulateOptions {
    long line = -1;
    std::string kind = "three_phase";
    double tau = 0.5;
    std::string method = "exact";
    int m = 64;
};

struct ScreenOptions {
    std::string kind = "three_phase";
    double tau = 0.5;
    std::string method = "exact";
    int m = 64;
};

struct EstimateOptions {
    std::string method = "ce";
    std::string config;
    double gamma = 1.0;
    std::size_t n = 10000;
    std::size_t n_per_iter = 1000;
    std::size_t n_final = 2000;
    double rho = 0.1;
    double lambda = 0.1;
    double epsilon_mix = 0.01;
    double smoothing = 0.7;
    std::string kind = "three_phase";
    std::string solver = "exact";
    int m = 64;
    long target = -1;
    bool per_line = false;
};

struct BenchOptions {
    std::vector<int> steps{10, 40, 70, 100, 150, 200, 300, 500};
    std::vector<double> taus{0.5};
    std::string kind = "three_phase";
    int reps = 20;
    int warmup = 3;
    bool no_trajectories = false;
    bool no_errors = false;
};

SolveMethod make_method(const std::string& name, int m) {
    if (name == "exact") {
        return SolveMethod::exact();
    }
    if (name == "perturbative") {
        if (m < 1) {
            throw ValidationError("--m must be at least 1");
        }
        return SolveMethod::perturbative(m);
    }
    if (name == "reference") {
        return SolveMethod::reference();
    }
    throw ValidationError("unknown solver method '" + name + "'");
}

std::ofstream open_output(const Globals& g, const std::string& name) {
    std::error_code ec;
    fs::create_directories(g.out_dir, ec);
    const fs::path path = fs::path(g.out_dir) / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw ValidationError("cannot write " + path.string());
    }
    return f;
}

std::string grid_hash(const Grid& grid) {
    return config_hash(save_grid(grid));
}

void write_trajectory(std::ostream& out, const Grid& grid, const Trajectory& traj,
                      OutputFormat format) {
    if (format == OutputFormat::csv) {
        write_trajectory_csv(out, grid, traj);
        return;
    }
    const auto n = static_cast<Eigen::Index>(grid.bus_count());
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const Eigen::VectorXd x = traj.state(k);
        std::vector<double> w(x.data(), x.data() + n);
        std::vector<double> th(x.data() + n, x.data() + 2 * n);
        out << json{{"t", traj.times[k]}, {"dtheta", w}, {"theta", th}}.dump() << "\n";
    }
}

int cmd_validate(const Globals& g, std::ostream& out) {
    const Grid grid = load_grid_file(g.grid);
    const Eigen::VectorXd theta = steady_state(grid);
    out << "ok: " << grid.bus_count() << " buses, " << grid.line_count() << " lines, reference bus "
        << grid.reference_bus() << "\n";
    out << "monitored lines: " << grid.monitored_lines().size() << "\n";
    out << "equilibrium within limits: " << (in_safety_polytope(theta, grid) ? "yes" : "no") << "\n";
    return 0;
}

int cmd_simulate(const Globals& g, const SimulateOptions& o, std::ostream& out) {
    const OutputFormat format = parse_output_format(g.format);
    const Grid grid = load_grid_file(g.grid);
    FaultScenario s;
    if (o.line >= 0) {
        s.line = static_cast<std::size_t>(o.line);
    }
    s.kind = parse_fault_kind(o.kind);
    s.duration = o.tau;
    const SolveMethod method = make_method(o.method, o.m);
    const Trajectory traj = PiecewiseSolver(grid).solve(s, g.horizon, g.dt, method);
    const OverloadResult ov = overload_report(traj, grid);

    const OutputHeader header{"simulate", g.seed,
                              json{{"grid", grid_hash(grid)}, {"scenario", json::parse(scenario_to_json(s))},
                                   {"T", g.horizon}, {"dt", g.dt}, {"method", method.label()}}
                                  .dump()};
    {
        auto f = open_output(g, std::string("trajectory") + extension(format));
        header.write(f, format);
        write_trajectory(f, grid, traj, format);
    }
    {
        auto f = open_output(g, std::string("overload") + extension(format));
        header.write(f, format);
        write_overload(f, grid, ov, format);
    }
    out << "simulated " << traj.size() << " samples with " << traj.meta.method.label()
        << (traj.meta.escalated ? " (escalated to exact)" : "") << "\n";
    for (const auto& w : traj.meta.warnings) {
        out << "warning: " << w << "\n";
    }
    for (const auto& w : ov.warnings) {
        out << "warning: " << w << "\n";
    }
    for (const auto& lo : ov.lines) {
        if (lo.seconds > 0.0) {
            out << "line " << lo.line << ": S = " << lo.seconds << " s\n";
        }
    }
    out << "global S = " << ov.global << " s\n";
    return 0;
}

int cmd_screen(const Globals& g, const ScreenOptions& o, std::ostream& out) {
    const OutputFormat format = parse_output_format(g.format);
    const Grid grid = load_grid_file(g.grid);
    if (!(o.tau >= 0.0)) {
        throw ValidationError("fault duration tau must be nonnegative");
    }
    const SolveMethod method = make_method(o.method, o.m);
    const ScreenResult r = screen(grid, parse_fault_kind(o.kind), o.tau, g.horizon, g.dt, method);
    const OutputHeader header{"screen", g.seed,
                              json{{"grid", grid_hash(grid)}, {"kind", o.kind}, {"tau", o.tau},
                                   {"T", g.horizon}, {"dt", g.dt}, {"method", method.label()}}
                                  .dump()};
    {
        auto f = open_output(g, std::string("screen") + extension(format));
        header.write(f, format);
        write_screen(f, r, format);
    }
    {
        auto f = open_output(g, std::string("ranking") + extension(format));
        header.write(f, format);
        write_ranking(f, r, format);
    }
    out << "screened " << grid.line_count() << " contingencies\n";
    const auto ranking = r.ranking();
    for (std::size_t k = 0; k < ranking.size(); ++k) {
        out << std::setw(4) << k + 1 << "  line " << ranking[k].first << "  worst S = " << ranking[k].second
            << " s\n";
    }
    return 0;
}

int cmd_estimate(const Globals& g, const EstimateOptions& o, const CLI::App& app, const CLI::App& sub,
                 std::ostream& out) {
    const OutputFormat format = parse_output_format(g.format);
    const Grid grid = load_grid_file(g.grid);

    RiskConfig c;
    if (!o.config.empty()) {
        std::ifstream f(o.config);
        if (!f) {
            throw ValidationError("config file not found: " + o.config);
        }
        std::stringstream ss;
        ss << f.rdbuf();
        c = RiskConfig::from_json(ss.str());
    }
    auto given = [&](const CLI::App& a, const char* name) { return o.config.empty() || a.count(name) > 0; };
    if (given(sub, "--gamma")) c.gamma = o.gamma;
    if (given(sub, "--rho")) c.rho = o.rho;
    if (given(sub, "--n-per-iter")) c.n_per_iter = o.n_per_iter;
    if (given(sub, "--n-final")) c.n_final = o.n_final;
    if (given(sub, "--lambda")) c.lambda_nominal = o.lambda;
    if (given(sub, "--epsilon-mix")) c.epsilon_mix = o.epsilon_mix;
    if (given(sub, "--smoothing")) c.smoothing = o.smoothing;
    if (given(sub, "--kind")) c.fault_kind = parse_fault_kind(o.kind);
    if (given(sub, "--solver") || given(sub, "--m")) c.method = make_method(o.solver, o.m);
    if (given(sub, "--per-line")) c.per_line_reoptimize = o.per_line;
    if (given(app, "--T")) c.horizon = g.horizon;
    if (given(app, "--dt")) c.dt = g.dt;
    if (given(app, "--seed")) c.seed = g.seed;

    if (o.method == "mc") {
        if (o.n < 1) {
            throw ValidationError("--n must be at least 1");
        }
        const GridScoreModel model(grid, c.horizon, c.dt, c.fault_kind, c.method);
        const Target target = o.target >= 0 ? Target::of_line(static_cast<std::size_t>(o.target))
                                            : Target::all_lines();
        const RiskEstimate e =
            mc_estimate(model, NominalLaw::uniform(grid.line_count(), c.lambda_nominal), c.gamma, o.n,
                        target, c.seed, c.fault_kind);
        const OutputHeader header{"estimate", c.seed,
                                  json{{"grid", grid_hash(grid)}, {"config", json::parse(c.to_json())},
                                       {"method", "mc"}, {"n", o.n}, {"target", target.label()}}
                                      .dump()};
        auto f = open_output(g, std::string("estimate") + extension(format));
        header.write(f, format);
        write_estimate(f, e, format);
        out << "mc " << target.label() << ": Q = " << e.q << " +- " << e.std_error << " (" << e.samples
            << " samples), zone " << to_string(classify_risk(e.q, c.zones)) << "\n";
        return 0;
    }
    if (o.method != "ce") {
        throw ValidationError("unknown estimate method '" + o.method + "'");
    }
    const RiskReport report = n1plus(grid, c);
    const OutputHeader header{"estimate", c.seed,
                              json{{"grid", grid_hash(grid)}, {"config", json::parse(c.to_json())}}.dump()};
    {
        auto f = open_output(g, std::string("risk") + extension(format));
        header.write(f, format);
        write_risk_table(f, report, format);
    }
    {
        auto f = open_output(g, "report.json");
        f << report_to_json(report);
    }
    {
        auto f = open_output(g, "timing.json");
        f << timing_to_json(report.timing);
    }
    print_risk_table(out, report);
    for (const auto& w : report.warnings) {
        out << "warning: " << w << "\n";
    }
    for (const auto& w : report.ce.warnings) {
        out << "warning: " << w << "\n";
    }
    return 0;
}

int cmd_bench(const Globals& g, const BenchOptions& o, std::ostream& out) {
    const OutputFormat format = parse_output_format(g.format);
    const Grid grid = load_grid_file(g.grid);
    BenchConfig c;
    c.steps = o.steps;
    c.taus = o.taus;
    c.kind = parse_fault_kind(o.kind);
    c.repetitions = o.reps;
    c.warmup = o.warmup;
    c.horizon = g.horizon;
    c.dt = g.dt;
    c.trajectories = !o.no_trajectories;
    c.errors = !o.no_errors;
    const BenchResult r = run_bench(grid, c);
    const OutputHeader header{"bench", g.seed,
                              json{{"grid", grid_hash(grid)}, {"m", o.steps}, {"taus", o.taus},
                                   {"kind", o.kind}, {"reps", o.reps}, {"warmup", o.warmup},
                                   {"T", g.horizon}, {"dt", g.dt}}
                                  .dump()};
    {
        auto f = open_output(g, std::string("bench") + extension(format));
        header.write(f, format);
        write_bench(f, r, format);
    }
    if (c.errors) {
        auto f = open_output(g, std::string("error_vs_m") + extension(format));
        header.write(f, format);
        write_error_vs_m(f, r, format);
    }
    out << std::left << std::setw(12) << "stage" << std::setw(16) << "method" << std::setw(16)
        << "per-ensemble" << std::setw(16) << "per-contingency" << "max rel error\n";
    auto row = [&](const BenchRecord& b) {
        const std::string name = b.method == "perturbative" ? "m=" + std::to_string(b.m) : b.method;
        std::ostringstream t1;
        std::ostringstream t2;
        t1 << std::setprecision(4) << b.mean << "s";
        t2 << std::setprecision(4) << b.per_contingency << "s";
        out << std::left << std::setw(12) << b.stage << std::setw(16) << name << std::setw(16) << t1.str()
            << std::setw(16) << t2.str() << b.max_error << "\n";
    };
    for (const auto& b : r.spectrum) {
        row(b);
    }
    for (const auto& b : r.trajectory) {
        row(b);
    }
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dynamic N-1 contingency screening"};
    app.name("n1plus");
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--grid", g.grid, "grid document (n1plus-grid/1)");
    app.add_option("--seed", g.seed, "master random seed");
    app.add_option("--T", g.horizon, "horizon in seconds");
    app.add_option("--dt", g.dt, "sampling step in seconds");
    app.add_option("--out-dir", g.out_dir, "directory for output files");
    app.add_option("--format", g.format, "csv or json-lines");

    auto* validate = app.add_subcommand("validate", "load and check a grid");

    SimulateOptions so;
    auto* simulate = app.add_subcommand("simulate", "simulate one fault scenario");
    simulate->add_option("--line", so.line, "faulted line index (omit for no fault)");
    simulate->add_option("--kind", so.kind, "three_phase or single_phase");
    simulate->add_option("--tau", so.tau, "fault duration in seconds");
    simulate->add_option("--method", so.method, "exact, perturbative or reference");
    simulate->add_option("--m", so.m, "perturbation steps");

    ScreenOptions sc;
    auto* screen_cmd = app.add_subcommand("screen", "fault every line in turn");
    screen_cmd->add_option("--kind", sc.kind, "three_phase or single_phase");
    screen_cmd->add_option("--tau", sc.tau, "fault duration in seconds");
    screen_cmd->add_option("--method", sc.method, "exact, perturbative or reference");
    screen_cmd->add_option("--m", sc.m, "perturbation steps");

    EstimateOptions eo;
    auto* estimate = app.add_subcommand("estimate", "estimate overload probabilities");
    estimate->add_option("--method", eo.method, "mc or ce");
    estimate->add_option("--config", eo.config, "risk config document");
    estimate->add_option("--gamma", eo.gamma, "overload threshold in seconds");
    estimate->add_option("--n", eo.n, "Monte Carlo samples");
    estimate->add_option("--n-per-iter", eo.n_per_iter, "cross-entropy batch size");
    estimate->add_option("--n-final", eo.n_final, "importance-sampling batch size");
    estimate->add_option("--rho", eo.rho, "elite quantile level");
    estimate->add_option("--lambda", eo.lambda, "nominal duration rate");
    estimate->add_option("--epsilon-mix", eo.epsilon_mix, "nominal mixture floor");
    estimate->add_option("--smoothing", eo.smoothing, "cross-entropy smoothing");
    estimate->add_option("--kind", eo.kind, "three_phase or single_phase");
    estimate->add_option("--solver", eo.solver, "exact or perturbative");
    estimate->add_option("--m", eo.m, "perturbation steps");
    estimate->add_option("--target", eo.target, "line index for mc (default global)");
    estimate->add_flag("--per-line", eo.per_line, "re-run cross-entropy for each line");

    BenchOptions bo;
    auto* bench = app.add_subcommand("bench", "time exact versus perturbative spectra");
    bench->add_option("--m", bo.steps, "perturbation step counts")->delimiter(',');
    bench->add_option("--taus", bo.taus, "fault durations for the error sweep")->delimiter(',');
    bench->add_option("--kind", bo.kind, "three_phase or single_phase");
    bench->add_option("--reps", bo.reps, "timed repetitions");
    bench->add_option("--warmup", bo.warmup, "untimed warm-up runs");
    bench->add_flag("--no-trajectories", bo.no_trajectories, "skip full trajectory timing");
    bench->add_flag("--no-errors", bo.no_errors, "skip the error sweep");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (g.grid.empty()) {
            throw ValidationError("--grid is required");
        }
        if (*validate) {
            return cmd_validate(g, out);
        }
        if (*simulate) {
            return cmd_simulate(g, so, out);
        }
        if (*screen_cmd) {
            return cmd_screen(g, sc, out);
        }
        if (*estimate) {
            return cmd_estimate(g, eo, app, *estimate, out);
        }
        if (*bench) {
            return cmd_bench(g, bo, out);
        }
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace n1plus
