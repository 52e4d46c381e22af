#pragma once

#include "n1plus/grid.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace n1plus {

enum class FaultKind { three_phase, single_phase };

const char* to_string(FaultKind kind);
FaultKind parse_fault_kind(std::string_view text);

/// One sampled contingency: line `line` is faulted on [onset, onset + duration].
/// An empty `line` is the no-fault scenario.
struct FaultScenario {
    std::optional<std::size_t> line;
    FaultKind kind = FaultKind::three_phase;
    double duration = 0.0;
    double onset = 0.0;
};

/// Multiplier applied to the faulted line's stiffness while the fault is active.
double fault_factor(FaultKind kind);
double fault_factor(const FaultScenario& scenario);

/// State-matrix change A_fault - A_0 for a single-line fault.
///
/// A line fault changes one Laplacian entry pattern, so the matrix is rank one:
/// matrix == left * right^T, with `left` supported on the velocity rows of the two
/// endpoints and `right` on their phase columns.
struct Perturbation {
    double scale = 1.0;
    Eigen::MatrixXd matrix;
    Eigen::VectorXd left;
    Eigen::VectorXd right;
    std::optional<std::size_t> line;

    bool is_zero() const noexcept { return !line || left.isZero(0.0); }
};

Perturbation build_perturbation(const Grid& grid, const FaultScenario& scenario);

/// Per-line stiffness factors of the grid while `scenario` is active.
std::vector<double> faulted_line_factors(const Grid& grid, const FaultScenario& scenario);

/// Nominal fault law: line chosen by `weights`, duration exponential with `rate`.
struct NominalLaw {
    std::vector<double> weights;
    double rate = 0.1;

    static NominalLaw uniform(std::size_t lines, double rate);
};

/// Proposal family: line chosen by `weights`, duration exponential with per-line `rates`.
struct ProposalParams {
    std::vector<double> weights;
    std::vector<double> rates;

    static ProposalParams from_nominal(const NominalLaw& nominal);
    std::size_t line_count() const noexcept { return weights.size(); }
};

using Rng = std::mt19937_64;

double nominal_density(const FaultScenario& scenario, const NominalLaw& nominal);
double proposal_density(const FaultScenario& scenario, const ProposalParams& proposal);

FaultScenario sample_scenario(const ProposalParams& proposal, FaultKind kind, Rng& rng);

/// JSON record {line, kind, tau, onset}; line is null for the no-fault scenario.
std::string scenario_to_json(const FaultScenario& scenario);
FaultScenario scenario_from_json(std::string_view text);

/// A replayable batch: the seed and proposal that produced `scenarios`.
struct ScenarioBatch {
    std::uint64_t seed = 0;
    FaultKind kind = FaultKind::three_phase;
    ProposalParams proposal;
    std::vector<FaultScenario> scenarios;
};

ScenarioBatch draw_batch(const ProposalParams& proposal, FaultKind kind, std::size_t count,
                         std::uint64_t seed);
std::string batch_to_json(const ScenarioBatch& batch);
ScenarioBatch batch_from_json(std::string_view text);

}  // namespace n1plus
