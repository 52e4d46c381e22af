#include "n1plus/bench.hpp"

#include "n1plus/error.hpp"
#include "n1plus/spectral.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ostream>

namespace n1plus {

namespace {

using Clock = std::chrono::steady_clock;

struct Stats {
    double mean = 0.0;
    double stddev = 0.0;
};

template <typename Fn>
Stats time_it(int warmup, int reps, Fn&& fn) {
    for (int i = 0; i < warmup; ++i) {
        fn();
    }
    std::vector<double> t;
    t.reserve(static_cast<std::size_t>(reps));
    for (int i = 0; i < reps; ++i) {
        const auto start = Clock::now();
        fn();
        t.push_back(std::chrono::duration<double>(Clock::now() - start).count());
    }
    Stats s;
    for (double v : t) {
        s.mean += v;
    }
    s.mean /= static_cast<double>(t.size());
    for (double v : t) {
        s.stddev += (v - s.mean) * (v - s.mean);
    }
    s.stddev = t.size() > 1 ? std::sqrt(s.stddev / static_cast<double>(t.size() - 1)) : 0.0;
    return s;
}

BenchRecord record(std::string stage, std::string method, int m, Stats s, std::size_t count,
                   double error) {
    BenchRecord r;
    r.stage = std::move(stage);
    r.method = std::move(method);
    r.m = m;
    r.mean = s.mean;
    r.stddev = s.stddev;
    r.per_contingency = s.mean / static_cast<double>(count);
    r.scenarios = count;
    r.max_error = error;
    return r;
}

}  // namespace

double max_trajectory_error(const PiecewiseSolver& solver, FaultKind kind,
                            const std::vector<double>& taus, double horizon, double dt, int m) {
    double worst = 0.0;
    for (std::size_t l = 0; l < solver.grid().line_count(); ++l) {
        for (double tau : taus) {
            const FaultScenario s{l, kind, tau, 0.0};
            const Trajectory exact = solver.solve(s, horizon, dt, SolveMethod::exact());
            const Trajectory approx = solver.solve(s, horizon, dt, SolveMethod::perturbative(m));
            worst = std::max(worst, relative_error(approx, exact));
        }
    }
    return worst;
}

BenchResult run_bench(const Grid& grid, const BenchConfig& config) {
    if (config.repetitions < 1 || config.warmup < 0) {
        throw ValidationError("repetitions must be at least 1 and warm-up nonnegative");
    }
    if (config.taus.empty()) {
        throw ValidationError("bench needs at least one fault duration");
    }
    for (int m : config.steps) {
        if (m < 1) {
            throw ValidationError("step counts must be at least 1");
        }
    }
    const PiecewiseSolver solver(grid);
    const StateSystem& sys = solver.system();
    const std::size_t lines = grid.line_count();
    std::vector<Perturbation> perts;
    for (std::size_t l = 0; l < lines; ++l) {
        perts.push_back(build_perturbation(grid, FaultScenario{l, config.kind, 1.0, 0.0}));
    }

    BenchResult out;
    volatile double sink = 0.0;

    const Stats exact = time_it(config.warmup, config.repetitions, [&] {
        for (const auto& p : perts) {
            const SpectralDecomposition d = eigendecompose(sys.matrix + p.matrix);
            sink = sink + d.values(0).real();
        }
    });
    out.spectrum.push_back(record("spectrum", "exact", 0, exact, lines, 0.0));

    for (int m : config.steps) {
        const Stats s = time_it(config.warmup, config.repetitions, [&] {
            const SpectralDecomposition base = eigendecompose(sys.matrix);
            for (const auto& p : perts) {
                const FactoredSpectrum f = perturb_multistep_rank_one(base, p.left, p.right, m);
                sink = sink + f.values()(0).real();
            }
        });
        double err = 0.0;
        if (config.errors) {
            err = max_trajectory_error(solver, config.kind, config.taus, config.horizon, config.dt, m);
            out.error_vs_m.emplace_back(m, err);
        }
        out.spectrum.push_back(record("spectrum", "perturbative", m, s, lines, err));
    }

    if (config.trajectories) {
        std::vector<FaultScenario> scenarios;
        for (std::size_t l = 0; l < lines; ++l) {
            for (double tau : config.taus) {
                scenarios.push_back({l, config.kind, tau, 0.0});
            }
        }
        const int reps = std::max(1, config.repetitions / 4);
        const int warm = std::min(config.warmup, 1);
        auto run = [&](const SolveMethod& method) {
            return time_it(warm, reps, [&] {
                for (const auto& s : scenarios) {
                    const Trajectory t = solver.solve(s, config.horizon, config.dt, method);
                    sink = sink + t.states(0, 0);
                }
            });
        };
        out.trajectory.push_back(
            record("trajectory", "exact", 0, run(SolveMethod::exact()), scenarios.size(), 0.0));
        double ref_err = 0.0;
        if (config.errors) {
            for (const auto& s : scenarios) {
                ref_err = std::max(ref_err, relative_error(solver.integrate(s, config.horizon, config.dt),
                                                           solver.solve(s, config.horizon, config.dt,
                                                                        SolveMethod::exact())));
            }
        }
        out.trajectory.push_back(
            record("trajectory", "reference", 0, run(SolveMethod::reference()), scenarios.size(), ref_err));
        for (std::size_t k = 0; k < config.steps.size(); ++k) {
            const int m = config.steps[k];
            const double err = config.errors ? out.error_vs_m[k].second : 0.0;
            out.trajectory.push_back(record("trajectory", "perturbative", m,
                                            run(SolveMethod::perturbative(m)), scenarios.size(), err));
        }
    }
    return out;
}

void write_bench(std::ostream& out, const BenchResult& result, OutputFormat format) {
    if (format == OutputFormat::csv) {
        out << "stage,method,m,mean_s,stddev_s,per_contingency_s,max_rel_error,scenarios\n";
    }
    auto emit = [&](const BenchRecord& r) {
        if (format == OutputFormat::csv) {
            out << r.stage << ',' << r.method << ',' << r.m << ',' << format_double(r.mean) << ','
                << format_double(r.stddev) << ',' << format_double(r.per_contingency) << ','
                << format_double(r.max_error) << ',' << r.scenarios << "\n";
        } else {
            out << nlohmann::json{{"stage", r.stage},         {"method", r.method},
                                  {"m", r.m},                 {"mean_s", r.mean},
                                  {"stddev_s", r.stddev},     {"per_contingency_s", r.per_contingency},
                                  {"max_rel_error", r.max_error}, {"scenarios", r.scenarios}}
                       .dump()
                << "\n";
        }
    };
    for (const auto& r : result.spectrum) {
        emit(r);
    }
    for (const auto& r : result.trajectory) {
        emit(r);
    }
}

void write_error_vs_m(std::ostream& out, const BenchResult& result, OutputFormat format) {
    if (format == OutputFormat::csv) {
        out << "m,max_rel_error\n";
    }
    for (const auto& [m, e] : result.error_vs_m) {
        if (format == OutputFormat::csv) {
            out << m << ',' << format_double(e) << "\n";
        } else {
            out << nlohmann::json{{"m", m}, {"max_rel_error", e}}.dump() << "\n";
        }
    }
}

}  // namespace n1plus
