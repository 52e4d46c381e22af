#pragma once

#include "n1plus/fault.hpp"
#include "n1plus/grid.hpp"
#include "n1plus/spectral.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace n1plus {

struct SolveMethod {
    enum class Kind { exact, perturbative, reference };
    Kind kind = Kind::exact;
    int m = 0;

    static SolveMethod exact() { return {Kind::exact, 0}; }
    static SolveMethod perturbative(int steps) { return {Kind::perturbative, steps}; }
    static SolveMethod reference() { return {Kind::reference, 0}; }
    std::string label() const;
};

struct TrajectoryMeta {
    SolveMethod method;
    /// A perturbative solve that fell back to exact decomposition.
    bool escalated = false;
    std::vector<std::string> warnings;
};

/// Sampled state x = (theta_dot; theta), one column per time.
struct Trajectory {
    std::vector<double> times;
    Eigen::MatrixXd states;
    FaultScenario scenario;
    TrajectoryMeta meta;
    double dt = 0.0;
    /// Index of the sample at the end of the fault window (the clearing time).
    std::size_t switch_index = 0;

    std::size_t size() const noexcept { return times.size(); }
    Eigen::Index dimension() const noexcept { return states.rows(); }
    Eigen::VectorXd state(std::size_t k) const { return states.col(static_cast<Eigen::Index>(k)); }
    double horizon() const noexcept { return times.empty() ? 0.0 : times.back(); }
};

/// Samples 0, dt, 2dt, ... up to T (the last sample is T itself), with `tau` inserted
/// unless it is within 1e-9 dt of a sample. Returns the index of tau's sample in
/// `switch_index`; tau >= T maps to the last sample.
std::vector<double> time_grid(double horizon, double dt, double tau, std::size_t& switch_index);

/// (e^{lambda t} - 1) / lambda, with its series near lambda t = 0.
Complex phi_function(Complex lambda, double t);

/// x(t) = e^{At} x + int_0^t e^{A(t-s)} P ds through the modal form of `dec`.
Eigen::VectorXd propagate(const SpectralDecomposition& dec, const Eigen::VectorXd& x_start,
                          const Eigen::VectorXd& forcing, double t);

/// Caches the state system and base decomposition of one grid; solves any number of
/// single-fault scenarios against it. Immutable after construction.
class PiecewiseSolver {
public:
    explicit PiecewiseSolver(Grid grid);

    const Grid& grid() const noexcept { return grid_; }
    const StateSystem& system() const noexcept { return system_; }
    const SpectralDecomposition& base() const noexcept { return base_; }

    /// Spectrum of A_0 + V. Sets `escalated` when a perturbative request fell back to exact.
    SpectralDecomposition faulted_spectrum(const FaultScenario& scenario,
                                           const SolveMethod& method, bool& escalated) const;

    Trajectory solve(const FaultScenario& scenario, double horizon, double dt,
                     const SolveMethod& method) const;

    /// Classical RK4 with the step split at tau.
    Trajectory integrate(const FaultScenario& scenario, double horizon, double dt) const;

private:
    Grid grid_;
    StateSystem system_;
    SpectralDecomposition base_;
};

Trajectory solve_piecewise(const Grid& grid, const FaultScenario& scenario, double horizon,
                           double dt, const SolveMethod& method);
Trajectory reference_integrate(const Grid& grid, const FaultScenario& scenario, double horizon,
                               double dt);

/// max_t ||x_a(t) - x_b(t)||_2 / max(||x_b(t)||_2, 1e-12)
double relative_error(const Trajectory& a, const Trajectory& b);

/// theta_dot^T M theta_dot + (theta - theta_ref)^T L (theta - theta_ref) per sample.
std::vector<double> energy_profile(const Grid& grid, const Trajectory& traj,
                                   const Eigen::VectorXd& theta_ref);

/// Wide CSV: `#` meta lines, then t, dtheta_<bus>..., theta_<bus>...
void write_trajectory_csv(std::ostream& out, const Grid& grid, const Trajectory& traj);
void write_trajectory_binary(std::ostream& out, const Trajectory& traj);
Trajectory read_trajectory_binary(std::istream& in);

}  // namespace n1plus
