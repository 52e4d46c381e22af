#include "fixtures.hpp"

#include "n1plus/error.hpp"
#include "n1plus/fault.hpp"
#include "n1plus/spectral.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

using namespace n1plus;

namespace {

// State matrix of a grid rebuilt from scratch with the faulted line's stiffness changed,
// or the line removed for a three-phase fault.
Eigen::MatrixXd rebuilt_faulted_matrix(const Grid& g, std::size_t line, FaultKind kind) {
    std::vector<Line> lines;
    for (std::size_t k = 0; k < g.line_count(); ++k) {
        Line l = g.lines()[k];
        l.susceptance.reset();
        if (k == line) {
            if (kind == FaultKind::three_phase) {
                continue;
            }
            l.stiffness *= 2.0 / 3.0;
        }
        lines.push_back(l);
    }
    const auto n = static_cast<Eigen::Index>(g.bus_count());
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
    for (const auto& l : lines) {
        const auto i = static_cast<Eigen::Index>(l.from);
        const auto j = static_cast<Eigen::Index>(l.to);
        lap(i, i) += l.stiffness;
        lap(j, j) += l.stiffness;
        lap(i, j) -= l.stiffness;
        lap(j, i) -= l.stiffness;
    }
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& b = g.buses()[static_cast<std::size_t>(i)];
        a(i, i) = -b.damping / b.inertia;
        a.block(i, n, 1, n) = -lap.row(i) / b.inertia;
        a(n + i, i) = 1.0;
    }
    return a;
}

}  // namespace

TEST_CASE("fault factors") {
    CHECK(fault_factor(FaultKind::three_phase) == 0.0);
    CHECK(fault_factor(FaultKind::single_phase) == 2.0 / 3.0);
    CHECK(fault_factor(FaultScenario{}) == 1.0);
    CHECK(fault_factor(FaultScenario{0, FaultKind::three_phase, 1.0, 0.0}) == 0.0);
}

TEST_CASE("no-fault scenario has a zero perturbation") {
    const Perturbation p = build_perturbation(fixtures::ring4(), FaultScenario{});
    CHECK(p.matrix.cwiseAbs().maxCoeff() == 0.0);
    CHECK(p.is_zero());
    CHECK(p.scale == 1.0);
}

TEST_CASE("single-phase fault on two buses") {
    const Grid g = fixtures::two_bus();
    const Perturbation p = build_perturbation(g, FaultScenario{0, FaultKind::single_phase, 0.5, 0.0});
    const Eigen::MatrixXd diff =
        rebuilt_faulted_matrix(g, 0, FaultKind::single_phase) - build_state_system(g).matrix;
    CHECK((p.matrix - diff).cwiseAbs().maxCoeff() <= 1e-15);
    for (Eigen::Index i = 0; i < 4; ++i) {
        for (Eigen::Index j = 0; j < 4; ++j) {
            if (i < 2 && j >= 2) {
                CHECK(std::abs(p.matrix(i, j)) == Catch::Approx(1.0 / 3.0));
            } else {
                CHECK(p.matrix(i, j) == 0.0);
            }
        }
    }
}

TEST_CASE("A0 + V matches the independently rebuilt faulted grid") {
    for (const auto& f : fixtures::small_fixtures()) {
        const Eigen::MatrixXd a0 = build_state_system(f.grid).matrix;
        for (std::size_t l = 0; l < f.grid.line_count(); ++l) {
            for (auto kind : {FaultKind::three_phase, FaultKind::single_phase}) {
                INFO(f.name << " line " << l << " " << to_string(kind));
                const Perturbation p = build_perturbation(f.grid, FaultScenario{l, kind, 1.0, 0.0});
                const Eigen::MatrixXd rebuilt = rebuilt_faulted_matrix(f.grid, l, kind);
                CHECK((a0 + p.matrix - rebuilt).cwiseAbs().maxCoeff() <= 1e-14);
                CHECK((p.left * p.right.transpose() - p.matrix).cwiseAbs().maxCoeff() == 0.0);
                const std::vector<double> factors = faulted_line_factors(f.grid, {l, kind, 1.0, 0.0});
                CHECK((build_state_matrix(f.grid, factors) - rebuilt).cwiseAbs().maxCoeff() <= 1e-14);

                int nonzero_rows = 0;
                for (Eigen::Index r = 0; r < p.matrix.rows(); ++r) {
                    nonzero_rows += p.matrix.row(r).cwiseAbs().maxCoeff() > 0.0 ? 1 : 0;
                }
                CHECK(nonzero_rows <= 4);
            }
        }
    }
}

TEST_CASE("faulted spectra agree with the rebuilt grid as multisets") {
    for (const auto& f : fixtures::small_fixtures()) {
        const Eigen::MatrixXd a0 = build_state_system(f.grid).matrix;
        for (std::size_t l = 0; l < f.grid.line_count(); ++l) {
            INFO(f.name << " line " << l);
            const auto kind = FaultKind::single_phase;
            const Perturbation p = build_perturbation(f.grid, FaultScenario{l, kind, 1.0, 0.0});
            const SpectralDecomposition a = eigendecompose(a0 + p.matrix);
            const SpectralDecomposition b = eigendecompose(rebuilt_faulted_matrix(f.grid, l, kind));
            CHECK(spectral_error(a, b).values <= 1e-9);
        }
    }
}

TEST_CASE("unknown line index") {
    CHECK_THROWS_AS(build_perturbation(fixtures::two_bus(), FaultScenario{5, FaultKind::three_phase, 1.0, 0.0}),
                    ValidationError);
}

TEST_CASE("nominal density") {
    const NominalLaw law = NominalLaw::uniform(36, 0.1);
    CHECK(nominal_density(FaultScenario{3, FaultKind::three_phase, 0.0, 0.0}, law) ==
          Catch::Approx(0.1 / 36.0).epsilon(1e-15));
    CHECK(0.1 / 36.0 == Catch::Approx(2.7778e-3).epsilon(1e-4));

    NominalLaw skewed{{0.0, 1.0}, 0.5};
    CHECK(nominal_density(FaultScenario{0, FaultKind::three_phase, 1.0, 0.0}, skewed) == 0.0);
    CHECK_THROWS_AS(nominal_density(FaultScenario{0, FaultKind::three_phase, -1.0, 0.0}, law),
                    ValidationError);
}

TEST_CASE("nominal density integrates to one") {
    const NominalLaw law{{0.2, 0.5, 0.3}, 0.7};
    // Composite Simpson on [0, 60] per line; the tail beyond is e^{-42}.
    const int n = 6000;
    const double h = 60.0 / n;
    double total = 0.0;
    for (std::size_t a = 0; a < 3; ++a) {
        double s = 0.0;
        for (int k = 0; k <= n; ++k) {
            const double w = (k == 0 || k == n) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
            s += w * nominal_density(FaultScenario{a, FaultKind::three_phase, k * h, 0.0}, law);
        }
        total += s * h / 3.0;
    }
    CHECK(total == Catch::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("proposal density") {
    const NominalLaw law = NominalLaw::uniform(4, 0.3);
    const ProposalParams same = ProposalParams::from_nominal(law);
    for (std::size_t a = 0; a < 4; ++a) {
        for (double tau : {0.0, 0.4, 3.0, 17.0}) {
            const FaultScenario s{a, FaultKind::three_phase, tau, 0.0};
            CHECK(proposal_density(s, same) == nominal_density(s, law));
        }
    }
    const ProposalParams point{{1.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
    CHECK(proposal_density(FaultScenario{1, FaultKind::three_phase, 0.5, 0.0}, point) == 0.0);

    const ProposalParams p{{0.5, 0.5}, {2.0, 1.0}};
    CHECK(proposal_density(FaultScenario{0, FaultKind::three_phase, 1.0, 0.0}, p) ==
          Catch::Approx(0.1353352832366127).epsilon(1e-14));
}

TEST_CASE("point-mass proposal always picks its line") {
    const ProposalParams p{{0.0, 0.0, 1.0, 0.0}, {1.0, 1.0, 1.0, 1.0}};
    Rng rng(3);
    for (int k = 0; k < 1000; ++k) {
        CHECK(sample_scenario(p, FaultKind::single_phase, rng).line == std::size_t{2});
    }
}

TEST_CASE("sampled line frequencies and mean durations") {
    const ProposalParams p{{0.1, 0.2, 0.3, 0.4}, {0.5, 1.0, 2.0, 4.0}};
    const int n = 100000;
    Rng rng(11);
    std::vector<int> count(4, 0);
    std::vector<double> sum(4, 0.0);
    for (int k = 0; k < n; ++k) {
        const FaultScenario s = sample_scenario(p, FaultKind::three_phase, rng);
        ++count[*s.line];
        sum[*s.line] += s.duration;
    }
    for (std::size_t a = 0; a < 4; ++a) {
        const double phi = p.weights[a];
        const double sigma = std::sqrt(n * phi * (1.0 - phi));
        CHECK(std::abs(count[a] - n * phi) <= 3.0 * sigma);
        const double mean = 1.0 / p.rates[a];
        const double se = mean / std::sqrt(static_cast<double>(count[a]));
        CHECK(std::abs(sum[a] / count[a] - mean) <= 3.0 * se);
    }
}

TEST_CASE("samples are reproducible from the seed") {
    const ProposalParams p = ProposalParams::from_nominal(NominalLaw::uniform(5, 0.1));
    const ScenarioBatch a = draw_batch(p, FaultKind::three_phase, 50, 99);
    const ScenarioBatch b = draw_batch(p, FaultKind::three_phase, 50, 99);
    CHECK(batch_to_json(a) == batch_to_json(b));
    const ScenarioBatch c = draw_batch(p, FaultKind::three_phase, 50, 100);
    CHECK(batch_to_json(a) != batch_to_json(c));
}

TEST_CASE("scenario and batch records round-trip") {
    const FaultScenario s{4, FaultKind::single_phase, 0.123456789012345, 0.0};
    const FaultScenario back = scenario_from_json(scenario_to_json(s));
    CHECK(back.line == s.line);
    CHECK(back.kind == s.kind);
    CHECK(back.duration == s.duration);

    const FaultScenario none = scenario_from_json(scenario_to_json(FaultScenario{}));
    CHECK_FALSE(none.line.has_value());

    const ProposalParams p{{0.25, 0.75}, {0.3, 0.9}};
    const ScenarioBatch batch = draw_batch(p, FaultKind::single_phase, 20, 5);
    const ScenarioBatch again = batch_from_json(batch_to_json(batch));
    CHECK(again.seed == 5);
    CHECK(batch_to_json(again) == batch_to_json(batch));
    const ScenarioBatch replay = draw_batch(again.proposal, again.kind, again.scenarios.size(), again.seed);
    CHECK(batch_to_json(replay) == batch_to_json(batch));

    CHECK_THROWS_AS(scenario_from_json("{\"line\": 1}"), ParseError);
    CHECK_THROWS_AS(scenario_from_json("[1,"), ParseError);
}
