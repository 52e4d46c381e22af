#pragma once

#include "n1plus/dynamics.hpp"
#include "n1plus/fault.hpp"
#include "n1plus/grid.hpp"
#include "n1plus/report.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace n1plus {

/// One timed method. Times are wall-clock seconds for the whole contingency ensemble;
/// per_contingency divides by the ensemble size.
struct BenchRecord {
    std::string stage;
    std::string method;
    int m = 0;
    double mean = 0.0;
    double stddev = 0.0;
    double per_contingency = 0.0;
    double max_error = 0.0;
    std::size_t scenarios = 0;
};

struct BenchConfig {
    std::vector<int> steps{10, 40, 70, 100, 150, 200, 300, 500};
    int repetitions = 20;
    int warmup = 3;
    std::vector<double> taus{0.5};
    FaultKind kind = FaultKind::three_phase;
    double horizon = 20.0;
    double dt = 0.01;
    /// Also time full trajectory solves (slow on large grids).
    bool trajectories = true;
    /// Compute the trajectory error column.
    bool errors = true;
};

struct BenchResult {
    /// Faulted-spectrum acquisition: exact re-decomposition per contingency versus one base
    /// decomposition plus the factored multistep update per contingency.
    std::vector<BenchRecord> spectrum;
    /// Full trajectory solve per (line, tau) contingency.
    std::vector<BenchRecord> trajectory;
    /// Max relative trajectory error against exact, per m, over all (line, tau).
    std::vector<std::pair<int, double>> error_vs_m;
};

BenchResult run_bench(const Grid& grid, const BenchConfig& config);

/// Max relative trajectory error of perturbative(m) against exact over every single-line
/// fault of `kind` and every tau in `taus`.
double max_trajectory_error(const PiecewiseSolver& solver, FaultKind kind,
                            const std::vector<double>& taus, double horizon, double dt, int m);

void write_bench(std::ostream& out, const BenchResult& result, OutputFormat format);
void write_error_vs_m(std::ostream& out, const BenchResult& result, OutputFormat format);

}  // namespace n1plus
