#pragma once

#include "n1plus/dynamics.hpp"
#include "n1plus/fault.hpp"
#include "n1plus/grid.hpp"
#include "n1plus/indicators.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace n1plus {

/// Maps a scenario to per-line overload seconds. Implementations must be safe to call
/// concurrently through the const interface.
class ScoreModel {
public:
    virtual ~ScoreModel() = default;
    virtual std::size_t line_count() const = 0;
    /// Fills `per_line` (size line_count()) and returns the global score.
    virtual double score(const FaultScenario& scenario, std::span<double> per_line) const = 0;
};

/// Overload scores of single-line faults on a grid, computed by modal propagation with
/// one cached faulted spectrum per line.
class GridScoreModel final : public ScoreModel {
public:
    GridScoreModel(const Grid& grid, double horizon, double dt, FaultKind kind,
                   const SolveMethod& method);

    std::size_t line_count() const override { return lines_; }
    double score(const FaultScenario& scenario, std::span<double> per_line) const override;

    const PiecewiseSolver& solver() const noexcept { return solver_; }
    /// Lines whose perturbative spectrum fell back to an exact decomposition.
    std::size_t escalations() const noexcept { return escalations_; }
    FaultKind kind() const noexcept { return kind_; }
    double horizon() const noexcept { return horizon_; }
    double dt() const noexcept { return dt_; }

private:
    struct Regime {
        SpectralDecomposition dec;
        Eigen::MatrixXd step;    // e^{A dt}
        Eigen::VectorXd offset;  // int_0^dt e^{As} P ds
    };

    PiecewiseSolver solver_;
    double horizon_;
    double dt_;
    FaultKind kind_;
    std::size_t lines_;
    std::size_t escalations_ = 0;
    Regime nominal_;
    std::vector<Regime> faulted_;
    Eigen::MatrixXd incidence_;  // |E| x n, rows e_i - e_j
    Eigen::VectorXd stiffness_;
    Eigen::VectorXd limits_;
    Eigen::VectorXd base_flows_;
    Eigen::VectorXd inertia_;
    Eigen::MatrixXd laplacian_;
    std::vector<bool> monitored_;
};

/// Score model from a plain function; used for analytic test families.
class FunctionScoreModel final : public ScoreModel {
public:
    using Function = std::function<double(const FaultScenario&, std::span<double>)>;
    FunctionScoreModel(std::size_t lines, Function f) : lines_(lines), f_(std::move(f)) {}

    std::size_t line_count() const override { return lines_; }
    double score(const FaultScenario& scenario, std::span<double> per_line) const override {
        return f_(scenario, per_line);
    }

private:
    std::size_t lines_;
    Function f_;
};

struct Target {
    bool global = true;
    std::size_t line = 0;

    static Target all_lines() { return {true, 0}; }
    static Target of_line(std::size_t l) { return {false, l}; }
    std::string label() const;
};

struct RiskEstimate {
    Target target;
    double gamma = 0.0;
    double q = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
    std::string method;
    std::optional<ProposalParams> proposal;
    int iterations = 0;
    double ess = 0.0;
    std::vector<std::string> warnings;

    double half_width() const noexcept { return 1.96 * std_error; }
};

/// Stage seed derived from a master seed by splitmix64.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// Scores of `scenarios` for every line (row-major, one row per scenario) and globally.
struct BatchScores {
    std::vector<double> per_line;
    std::vector<double> global;
    std::size_t lines = 0;

    double target(std::size_t k, const Target& t) const {
        return t.global ? global[k] : per_line[k * lines + t.line];
    }
};

BatchScores evaluate_batch(const ScoreModel& model, const std::vector<FaultScenario>& scenarios,
                           unsigned threads = 0);

RiskEstimate mc_estimate(const ScoreModel& model, const NominalLaw& nominal, double gamma,
                         std::size_t n, const Target& target, std::uint64_t seed,
                         FaultKind kind = FaultKind::three_phase, unsigned threads = 0);

struct CeConfig {
    double rho = 0.1;
    double smoothing = 0.7;
    double epsilon_mix = 0.01;
    double tolerance = 1e-3;
    int max_iterations = 50;
    /// Stop after this many iterations run at the target level gamma.
    int settle_iterations = 1;
    std::size_t n_per_iter = 1000;
    unsigned threads = 0;
};

struct CeIteration {
    int iteration = 0;
    double level = 0.0;
    std::size_t elite = 0;
    double ess = 0.0;
    double change = 0.0;
    ProposalParams params;
};

struct CeResult {
    ProposalParams params;
    std::vector<CeIteration> history;
    std::size_t samples = 0;
    bool reached_gamma = false;
    std::vector<std::string> warnings;

    int iterations() const noexcept { return static_cast<int>(history.size()); }
};

/// Cross-entropy fit of the proposal family to the event {S_target >= gamma}.
/// Throws EmptyEliteError when a batch has no sample above the previous level.
CeResult ce_optimize(const ScoreModel& model, const NominalLaw& nominal, double gamma,
                     const Target& target, const CeConfig& config, std::uint64_t seed,
                     FaultKind kind = FaultKind::three_phase);

/// Importance-sampling estimate of P[S_target >= gamma] with samples from `proposal`.
RiskEstimate is_estimate(const ScoreModel& model, const ProposalParams& proposal,
                         const NominalLaw& nominal, double gamma, std::size_t n,
                         const Target& target, std::uint64_t seed,
                         FaultKind kind = FaultKind::three_phase, unsigned threads = 0);

/// One IS batch shared by several targets.
std::vector<RiskEstimate> is_estimate_all(const ScoreModel& model, const ProposalParams& proposal,
                                          const NominalLaw& nominal, double gamma, std::size_t n,
                                          const std::vector<Target>& targets, std::uint64_t seed,
                                          FaultKind kind = FaultKind::three_phase,
                                          unsigned threads = 0);

struct RiskConfig {
    double gamma = 1.0;
    double rho = 0.1;
    std::size_t n_per_iter = 1000;
    std::size_t n_final = 2000;
    double lambda_nominal = 0.1;
    FaultKind fault_kind = FaultKind::three_phase;
    double horizon = 20.0;
    double dt = 0.01;
    SolveMethod method = SolveMethod::exact();
    std::uint64_t seed = 1;
    double epsilon_mix = 0.01;
    double smoothing = 0.7;
    bool per_line_reoptimize = false;
    ZoneThresholds zones;
    unsigned threads = 0;

    /// Reads the config keys of a JSON document; absent keys keep their defaults.
    static RiskConfig from_json(std::string_view text);
    std::string to_json() const;
    CeConfig ce() const;
};

struct LineRisk {
    RiskEstimate estimate;
    RiskZone zone = RiskZone::green;
};

struct RiskTiming {
    double setup = 0.0;
    double ce = 0.0;
    double estimate = 0.0;
};

struct RiskReport {
    RiskConfig config;
    std::vector<LineRisk> lines;
    LineRisk global;
    CeResult ce;
    bool ce_fallback = false;
    std::size_t escalations = 0;
    std::vector<std::string> warnings;
    RiskTiming timing;
};

/// CE on the global indicator, then per-line IS estimates under the fitted proposal.
RiskReport n1plus(const Grid& grid, const RiskConfig& config);

}  // namespace n1plus
