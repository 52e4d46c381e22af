#include "n1plus/dynamics.hpp"

#include "n1plus/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

namespace n1plus {

namespace {

constexpr double kSnap = 1e-9;
constexpr char kMagic[8] = {'N', '1', 'T', 'R', 'A', 'J', '0', '1'};

void check_window(double horizon, double dt) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw ValidationError("horizon T must be positive");
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw ValidationError("time step dt must be positive");
    }
    if (dt > horizon) {
        throw ValidationError("time step dt exceeds the horizon T");
    }
}

void check_scenario(const Grid& grid, const FaultScenario& s) {
    if (!(s.duration >= 0.0) || std::isnan(s.duration)) {
        throw ValidationError("fault duration tau must be nonnegative");
    }
    if (s.onset != 0.0) {
        throw ValidationError("fault onset must be 0 (faults start from equilibrium)");
    }
    if (s.line && *s.line >= grid.line_count()) {
        throw ValidationError("unknown line index " + std::to_string(*s.line));
    }
}

double inf_norm(const Eigen::MatrixXd& m) {
    return m.cwiseAbs().rowwise().sum().maxCoeff();
}

// Exact one-step modal map for a fixed width h.
struct ModalStep {
    CVector decay;
    CVector kick;

    ModalStep(const SpectralDecomposition& dec, const CVector& eta, double h)
        : decay(dec.values.size()), kick(dec.values.size()) {
        for (Eigen::Index i = 0; i < dec.values.size(); ++i) {
            decay(i) = std::exp(dec.values(i) * h);
            kick(i) = phi_function(dec.values(i), h) * eta(i);
        }
    }

    void apply(CVector& xi) const { xi = decay.cwiseProduct(xi) + kick; }
};

template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) {
        throw ParseError("truncated trajectory file");
    }
    return v;
}

}  // namespace

std::string SolveMethod::label() const {
    switch (kind) {
    case Kind::exact:
        return "exact";
    case Kind::perturbative:
        return "perturbative(m=" + std::to_string(m) + ")";
    case Kind::reference:
        return "reference";
    }
    return "unknown";
}

std::vector<double> time_grid(double horizon, double dt, double tau, std::size_t& switch_index) {
    check_window(horizon, dt);
    if (!(tau >= 0.0)) {
        throw ValidationError("fault duration tau must be nonnegative");
    }
    const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - kSnap));
    std::vector<double> t;
    t.reserve(steps + 2);
    for (std::size_t k = 0; k < steps; ++k) {
        t.push_back(static_cast<double>(k) * dt);
    }
    t.push_back(horizon);

    if (tau >= horizon - kSnap * dt) {
        switch_index = t.size() - 1;
        return t;
    }
    const auto it = std::lower_bound(t.begin(), t.end(), tau);
    auto k = static_cast<std::size_t>(it - t.begin());
    if (std::abs(t[k] - tau) <= kSnap * dt) {
        switch_index = k;
    } else if (k > 0 && std::abs(t[k - 1] - tau) <= kSnap * dt) {
        switch_index = k - 1;
    } else {
        t.insert(t.begin() + static_cast<std::ptrdiff_t>(k), tau);
        switch_index = k;
    }
    return t;
}

Complex phi_function(Complex lambda, double t) {
    const Complex z = lambda * t;
    if (std::abs(z) < 1e-4) {
        return t * (1.0 + z * (1.0 / 2.0 + z * (1.0 / 6.0 + z * (1.0 / 24.0))));
    }
    return (std::exp(z) - 1.0) / lambda;
}

Eigen::VectorXd propagate(const SpectralDecomposition& dec, const Eigen::VectorXd& x_start,
                          const Eigen::VectorXd& forcing, double t) {
    if (!(t >= 0.0)) {
        throw ValidationError("propagation time must be nonnegative");
    }
    if (t == 0.0) {
        return x_start;
    }
    const CVector eta = dec.to_modal(forcing);
    CVector xi = dec.to_modal(x_start);
    ModalStep(dec, eta, t).apply(xi);
    return dec.from_modal(xi);
}

PiecewiseSolver::PiecewiseSolver(Grid grid)
    : grid_(std::move(grid)), system_(build_state_system(grid_)), base_(eigendecompose(system_.matrix)) {}

SpectralDecomposition PiecewiseSolver::faulted_spectrum(const FaultScenario& scenario,
                                                        const SolveMethod& method,
                                                        bool& escalated) const {
    escalated = false;
    const Perturbation pert = build_perturbation(grid_, scenario);
    if (pert.is_zero()) {
        return base_;
    }
    if (method.kind == SolveMethod::Kind::perturbative) {
        if (method.m < 1) {
            throw ValidationError("perturbative method needs m >= 1");
        }
        try {
            return perturb_multistep_rank_one(base_, pert.left, pert.right, method.m).materialize();
        } catch (const DegeneracyError&) {
            escalated = true;
        }
    }
    return eigendecompose(system_.matrix + pert.matrix);
}

Trajectory PiecewiseSolver::solve(const FaultScenario& scenario, double horizon, double dt,
                                  const SolveMethod& method) const {
    if (method.kind == SolveMethod::Kind::reference) {
        return integrate(scenario, horizon, dt);
    }
    check_scenario(grid_, scenario);
    Trajectory traj;
    traj.scenario = scenario;
    traj.dt = dt;
    traj.meta.method = method;
    traj.times = time_grid(horizon, dt, scenario.line ? scenario.duration : 0.0, traj.switch_index);
    if (scenario.duration >= horizon && scenario.line) {
        traj.meta.warnings.push_back("fault outlasts the horizon; whole window faulted");
    }

    const std::size_t count = traj.times.size();
    const auto dim = static_cast<Eigen::Index>(grid_.state_dimension());
    traj.states.resize(dim, static_cast<Eigen::Index>(count));
    traj.states.col(0) = system_.equilibrium;

    const bool faulted = scenario.line && traj.switch_index > 0;
    SpectralDecomposition fault_dec;
    if (faulted) {
        fault_dec = faulted_spectrum(scenario, method, traj.meta.escalated);
    }

    const SpectralDecomposition* dec = faulted ? &fault_dec : &base_;
    CVector eta = dec->to_modal(system_.forcing);
    CVector xi = dec->to_modal(system_.equilibrium);
    ModalStep uniform(*dec, eta, dt);
    for (std::size_t k = 1; k < count; ++k) {
        if (faulted && k == traj.switch_index + 1) {
            dec = &base_;
            eta = dec->to_modal(system_.forcing);
            xi = dec->to_modal(traj.states.col(static_cast<Eigen::Index>(k - 1)));
            uniform = ModalStep(*dec, eta, dt);
        }
        const double h = traj.times[k] - traj.times[k - 1];
        if (std::abs(h - dt) <= kSnap * dt) {
            uniform.apply(xi);
        } else {
            ModalStep(*dec, eta, h).apply(xi);
        }
        traj.states.col(static_cast<Eigen::Index>(k)) = dec->from_modal(xi);
    }
    return traj;
}

Trajectory PiecewiseSolver::integrate(const FaultScenario& scenario, double horizon,
                                      double dt) const {
    check_scenario(grid_, scenario);
    Trajectory traj;
    traj.scenario = scenario;
    traj.dt = dt;
    traj.meta.method = SolveMethod::reference();
    traj.times = time_grid(horizon, dt, scenario.line ? scenario.duration : 0.0, traj.switch_index);

    const Eigen::MatrixXd& a0 = system_.matrix;
    const Eigen::MatrixXd af = system_.matrix + build_perturbation(grid_, scenario).matrix;
    const double norm = std::max(inf_norm(a0), inf_norm(af));
    if (dt > 0.2 / norm) {
        std::ostringstream msg;
        msg << "dt = " << dt << " exceeds 0.2/||A|| = " << 0.2 / norm << "; RK4 accuracy degraded";
        traj.meta.warnings.push_back(msg.str());
    }

    const std::size_t count = traj.times.size();
    const Eigen::VectorXd& p = system_.forcing;
    traj.states.resize(a0.rows(), static_cast<Eigen::Index>(count));
    Eigen::VectorXd x = system_.equilibrium;
    traj.states.col(0) = x;
    for (std::size_t k = 1; k < count; ++k) {
        const Eigen::MatrixXd& a = (scenario.line && k <= traj.switch_index) ? af : a0;
        const double h = traj.times[k] - traj.times[k - 1];
        const Eigen::VectorXd k1 = a * x + p;
        const Eigen::VectorXd k2 = a * (x + 0.5 * h * k1) + p;
        const Eigen::VectorXd k3 = a * (x + 0.5 * h * k2) + p;
        const Eigen::VectorXd k4 = a * (x + h * k3) + p;
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        traj.states.col(static_cast<Eigen::Index>(k)) = x;
    }
    return traj;
}

Trajectory solve_piecewise(const Grid& grid, const FaultScenario& scenario, double horizon,
                           double dt, const SolveMethod& method) {
    return PiecewiseSolver(grid).solve(scenario, horizon, dt, method);
}

Trajectory reference_integrate(const Grid& grid, const FaultScenario& scenario, double horizon,
                               double dt) {
    return PiecewiseSolver(grid).integrate(scenario, horizon, dt);
}

double relative_error(const Trajectory& a, const Trajectory& b) {
    if (a.size() != b.size() || a.dimension() != b.dimension()) {
        throw ValidationError("trajectories have different shapes");
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (std::abs(a.times[k] - b.times[k]) > 1e-12 * std::max(1.0, std::abs(b.times[k]))) {
            throw ValidationError("trajectories have different time grids");
        }
        const auto c = static_cast<Eigen::Index>(k);
        const double num = (a.states.col(c) - b.states.col(c)).norm();
        const double den = std::max(b.states.col(c).norm(), 1e-12);
        worst = std::max(worst, num / den);
    }
    return worst;
}

std::vector<double> energy_profile(const Grid& grid, const Trajectory& traj,
                                   const Eigen::VectorXd& theta_ref) {
    const auto n = static_cast<Eigen::Index>(grid.bus_count());
    const Eigen::MatrixXd lap = build_laplacian(grid);
    const Eigen::VectorXd m = grid.inertias();
    std::vector<double> e;
    e.reserve(traj.size());
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const auto c = static_cast<Eigen::Index>(k);
        const Eigen::VectorXd w = traj.states.col(c).head(n);
        const Eigen::VectorXd d = traj.states.col(c).tail(n) - theta_ref;
        e.push_back(w.dot(m.cwiseProduct(w)) + d.dot(lap * d));
    }
    return e;
}

void write_trajectory_csv(std::ostream& out, const Grid& grid, const Trajectory& traj) {
    const auto old_precision = out.precision(17);
    out << "# method=" << traj.meta.method.label() << " escalated=" << (traj.meta.escalated ? 1 : 0)
        << "\n";
    out << "# line=";
    if (traj.scenario.line) {
        out << *traj.scenario.line;
    } else {
        out << "none";
    }
    out << " kind=" << to_string(traj.scenario.kind) << " tau=" << traj.scenario.duration
        << " onset=" << traj.scenario.onset << " dt=" << traj.dt << "\n";
    for (const auto& w : traj.meta.warnings) {
        out << "# warning: " << w << "\n";
    }
    out << "t";
    for (const auto& b : grid.buses()) {
        out << ",dtheta_" << b.id;
    }
    for (const auto& b : grid.buses()) {
        out << ",theta_" << b.id;
    }
    out << "\n";
    for (std::size_t k = 0; k < traj.size(); ++k) {
        out << traj.times[k];
        for (Eigen::Index r = 0; r < traj.dimension(); ++r) {
            out << ',' << traj.states(r, static_cast<Eigen::Index>(k));
        }
        out << "\n";
    }
    out.precision(old_precision);
}

void write_trajectory_binary(std::ostream& out, const Trajectory& traj) {
    out.write(kMagic, sizeof(kMagic));
    put<std::uint64_t>(out, traj.size());
    put<std::uint64_t>(out, static_cast<std::uint64_t>(traj.dimension()));
    put<double>(out, traj.dt);
    put<std::uint64_t>(out, traj.switch_index);
    put<std::int64_t>(out, traj.scenario.line ? static_cast<std::int64_t>(*traj.scenario.line) : -1);
    put<std::int32_t>(out, traj.scenario.kind == FaultKind::three_phase ? 0 : 1);
    put<double>(out, traj.scenario.duration);
    put<double>(out, traj.scenario.onset);
    out.write(reinterpret_cast<const char*>(traj.times.data()),
              static_cast<std::streamsize>(traj.times.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(traj.states.data()),
              static_cast<std::streamsize>(traj.states.size() * sizeof(double)));
}

Trajectory read_trajectory_binary(std::istream& in) {
    char magic[sizeof(kMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ParseError("not a trajectory file");
    }
    Trajectory traj;
    const auto count = get<std::uint64_t>(in);
    const auto dim = get<std::uint64_t>(in);
    traj.dt = get<double>(in);
    traj.switch_index = get<std::uint64_t>(in);
    const auto line = get<std::int64_t>(in);
    if (line >= 0) {
        traj.scenario.line = static_cast<std::size_t>(line);
    }
    traj.scenario.kind = get<std::int32_t>(in) == 0 ? FaultKind::three_phase : FaultKind::single_phase;
    traj.scenario.duration = get<double>(in);
    traj.scenario.onset = get<double>(in);
    if (count > (1ULL << 32) || dim > (1ULL << 16)) {
        throw ParseError("trajectory header sizes are implausible");
    }
    traj.times.resize(count);
    traj.states.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(count));
    in.read(reinterpret_cast<char*>(traj.times.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    in.read(reinterpret_cast<char*>(traj.states.data()),
            static_cast<std::streamsize>(count * dim * sizeof(double)));
    if (!in) {
        throw ParseError("truncated trajectory file");
    }
    return traj;
}

}  // namespace n1plus
