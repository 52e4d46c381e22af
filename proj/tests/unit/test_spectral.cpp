#include "fixtures.hpp"

#include "n1plus/error.hpp"
#include "n1plus/fault.hpp"
#include "n1plus/spectral.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace n1plus;

namespace {

double max_abs(const CMatrix& m) {
    return m.cwiseAbs().maxCoeff();
}

// Least-squares slope of log(err) against log(m).
double loglog_slope(const std::vector<double>& m, const std::vector<double>& e) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(m.size());
    for (std::size_t k = 0; k < m.size(); ++k) {
        const double x = std::log(m[k]);
        const double y = std::log(e[k]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("diagonal input") {
    Eigen::MatrixXd a(2, 2);
    a << 1, 0, 0, 2;
    const SpectralDecomposition d = eigendecompose(a);
    CHECK(d.values(0) == Complex(1.0, 0.0));
    CHECK(d.values(1) == Complex(2.0, 0.0));
    CHECK(max_abs(CMatrix(d.vectors.cwiseAbs().cast<Complex>()) - CMatrix::Identity(2, 2)) <= 1e-15);
    CHECK(d.is_exact());
}

TEST_CASE("rotation generator has eigenvalues plus and minus i") {
    Eigen::MatrixXd a(2, 2);
    a << 0, -1, 1, 0;
    const SpectralDecomposition d = eigendecompose(a);
    CHECK(std::abs(d.values(0) - Complex(0.0, -1.0)) <= 1e-15);
    CHECK(std::abs(d.values(1) - Complex(0.0, 1.0)) <= 1e-15);
}

TEST_CASE("exact decompositions reconstruct their matrix") {
    for (const auto& f : fixtures::small_fixtures()) {
        INFO(f.name);
        const Eigen::MatrixXd a = build_state_system(f.grid).matrix;
        const SpectralDecomposition d = eigendecompose(a);
        const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
        CHECK(d.residual(a) <= 1e-8 * norm);
        CHECK(d.biorthogonality_defect() <= 1e-8);
        for (Eigen::Index k = 1; k < d.values.size(); ++k) {
            const Complex p = d.values(k - 1);
            const Complex q = d.values(k);
            CHECK((p.real() < q.real() || (p.real() == q.real() && p.imag() <= q.imag())));
        }
    }
    const Eigen::MatrixXd a = build_state_system(fixtures::two_bus()).matrix;
    CHECK(eigendecompose(a).residual(a) <= 1e-10);
}

TEST_CASE("defective matrices are rejected") {
    Eigen::MatrixXd a(2, 2);
    a << 0, 1, 0, 0;
    CHECK_THROWS_AS(eigendecompose(a), NumericalError);
}

TEST_CASE("decomposition is deterministic") {
    const Eigen::MatrixXd a = build_state_system(fixtures::mesh6()).matrix;
    CHECK(spectral_to_json(eigendecompose(a)) == spectral_to_json(eigendecompose(a)));
}

TEST_CASE("gap matrix") {
    CVector v(2);
    v << 1.0, 2.0;
    const PiPlus p = pi_plus(v, 1e-8);
    CHECK(p.matrix(0, 0) == 0.0);
    CHECK(p.matrix(0, 1) == Complex(-1.0));
    CHECK(p.matrix(1, 0) == Complex(1.0));
    CHECK(p.matrix(1, 1) == 0.0);
    CHECK_FALSE(p.degenerate);

    CVector w(2);
    w << 1.0, 1.0;
    const PiPlus q = pi_plus(w, 1e-8);
    CHECK(max_abs(q.matrix) == 0.0);
    CHECK(q.degenerate);
    CHECK(q.zeroed == 2);

    CVector u(4);
    u << Complex(-0.5, 1.3), Complex(-0.5, -1.3), Complex(-1.0, 0.0), Complex(0.0, 0.0);
    const PiPlus r = pi_plus(u);
    CHECK(max_abs(CMatrix(r.matrix.transpose() + r.matrix)) == 0.0);
}

TEST_CASE("zero perturbation leaves the base unchanged") {
    const SpectralDecomposition base = eigendecompose(build_state_system(fixtures::ring4()).matrix);
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(8, 8);
    const SpectralDecomposition one = perturb_first_order(base, zero, 0.3);
    CHECK(one.vectors == base.vectors);
    CHECK(one.values == base.values);
    CHECK(one.inverse == base.inverse);
    for (int m : {1, 7, 32}) {
        const SpectralDecomposition many = perturb_multistep(base, zero, m);
        CHECK(many.vectors == base.vectors);
        CHECK(many.values == base.values);
        CHECK(many.inverse == base.inverse);
        CHECK(many.steps == m);
    }
}

TEST_CASE("commuting diagonal perturbation is exact at first order") {
    Eigen::MatrixXd a(2, 2);
    a << 1, 0, 0, 2;
    const SpectralDecomposition base = eigendecompose(a);
    Eigen::MatrixXd v(2, 2);
    v << 1, 0, 0, 0;
    const SpectralDecomposition out = perturb_first_order(base, v, 0.5);
    CHECK(out.values(0) == Complex(1.5));
    CHECK(out.values(1) == Complex(2.0));
    CHECK(out.vectors == base.vectors);
    CHECK(out.steps == 1);
    CHECK_FALSE(out.is_exact());
}

TEST_CASE("first-order eigenvalue error is quadratic in the scale") {
    const Grid g = fixtures::two_bus();
    const Eigen::MatrixXd a0 = build_state_system(g).matrix;
    const SpectralDecomposition base = eigendecompose(a0);
    const Eigen::MatrixXd v = build_perturbation(g, {0, FaultKind::single_phase, 1.0, 0.0}).matrix;
    auto err = [&](double a) {
        return spectral_error(perturb_first_order(base, v, a), eigendecompose(a0 + a * v)).values;
    };
    for (double a : {0.2, 0.1, 0.05}) {
        const double ratio = err(a) / err(a / 2);
        INFO("a = " << a << " ratio " << ratio);
        CHECK(ratio >= 3.5);
        CHECK(ratio <= 4.5);
    }
}

TEST_CASE("one multistep step is one first-order update") {
    const Grid g = fixtures::triangle();
    const SpectralDecomposition base = eigendecompose(build_state_system(g).matrix);
    const Eigen::MatrixXd v = build_perturbation(g, {1, FaultKind::single_phase, 1.0, 0.0}).matrix;
    const SpectralDecomposition a = perturb_multistep(base, v, 1);
    const SpectralDecomposition b = perturb_first_order(base, v, 1.0);
    CHECK(a.vectors == b.vectors);
    CHECK(a.values == b.values);
    CHECK(a.inverse == b.inverse);
}

TEST_CASE("multistep error falls like 1/m") {
    struct Case {
        std::string name;
        Grid grid;
        std::size_t line;
        FaultKind kind;
    };
    const std::vector<Case> cases = {
        {"two_bus", fixtures::two_bus(), 0, FaultKind::single_phase},
        {"triangle", fixtures::triangle(), 2, FaultKind::three_phase},
        {"ring4", fixtures::ring4(), 2, FaultKind::three_phase},
        {"mesh6", fixtures::mesh6(), 4, FaultKind::single_phase},
    };
    for (const auto& c : cases) {
        INFO(c.name);
        const Eigen::MatrixXd a0 = build_state_system(c.grid).matrix;
        const SpectralDecomposition base = eigendecompose(a0);
        const Eigen::MatrixXd v = build_perturbation(c.grid, {c.line, c.kind, 1.0, 0.0}).matrix;
        const SpectralDecomposition exact = eigendecompose(a0 + v);
        std::vector<double> ms;
        std::vector<double> errs;
        for (int m = 2; m <= 64; m *= 2) {
            ms.push_back(m);
            errs.push_back(spectral_error(perturb_multistep(base, v, m), exact).max());
        }
        for (std::size_t k = 1; k < errs.size(); ++k) {
            CHECK(errs[k] <= 1.05 * errs[k - 1]);
        }
        const double slope = loglog_slope(ms, errs);
        INFO("slope " << slope);
        CHECK(slope >= -1.6);
        CHECK(slope <= -0.6);
    }
}

TEST_CASE("factored rank-one route matches the literal multistep update") {
    for (const auto& f : fixtures::small_fixtures()) {
        const Eigen::MatrixXd a0 = build_state_system(f.grid).matrix;
        const SpectralDecomposition base = eigendecompose(a0);
        for (std::size_t l = 0; l < f.grid.line_count(); l += 2) {
            INFO(f.name << " line " << l);
            const Perturbation p = build_perturbation(f.grid, {l, FaultKind::single_phase, 1.0, 0.0});
            const int m = 12;
            const SpectralDecomposition literal = perturb_multistep(base, p.matrix, m);
            const FactoredSpectrum fac = perturb_multistep_rank_one(base, p.left, p.right, m);
            const SpectralDecomposition mat = fac.materialize();
            const double su = max_abs(literal.vectors);
            const double si = max_abs(literal.inverse);
            CHECK(max_abs(CMatrix(mat.vectors - literal.vectors)) <= 1e-10 * su);
            CHECK(max_abs(CMatrix(mat.inverse - literal.inverse)) <= 1e-10 * si);
            CHECK((fac.values() - literal.values).cwiseAbs().maxCoeff() <=
                  1e-10 * literal.values.cwiseAbs().maxCoeff());
            CHECK(mat.steps == m);

            const CVector x = CVector::LinSpaced(base.dimension(), Complex(0.3, 0.1), Complex(-1.0, 0.5));
            CHECK((fac.apply_vectors(x) - mat.vectors * x).cwiseAbs().maxCoeff() <= 1e-10 * su * x.norm());
            CHECK((fac.apply_inverse(x) - mat.inverse * x).cwiseAbs().maxCoeff() <= 1e-10 * si * x.norm());
            const CMatrix rows = CMatrix::Ones(2, base.dimension());
            CHECK(max_abs(CMatrix(fac.right_apply_vectors(rows) - rows * mat.vectors)) <=
                  1e-10 * su * base.dimension());
        }
    }
}

TEST_CASE("degenerate spectra are refused") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 4);
    a.diagonal() << 1.0, 1.0, 2.0, 3.0;
    const SpectralDecomposition base = eigendecompose(a);
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(4, 4);
    v(0, 3) = 0.1;
    CHECK_THROWS_AS(perturb_first_order(base, v, 0.5), DegeneracyError);
    CHECK_THROWS_AS(perturb_multistep(base, v, 4), DegeneracyError);
    CHECK_THROWS_AS(perturb_multistep_rank_one(base, v.col(3), Eigen::VectorXd::Unit(4, 3) * 0.0 +
                                                                 Eigen::VectorXd::Unit(4, 3), 4),
                    DegeneracyError);
}

TEST_CASE("bad arguments") {
    const SpectralDecomposition base = eigendecompose(build_state_system(fixtures::two_bus()).matrix);
    const Eigen::MatrixXd v = Eigen::MatrixXd::Zero(4, 4);
    CHECK_THROWS_AS(perturb_first_order(base, v, 0.0), ValidationError);
    CHECK_THROWS_AS(perturb_first_order(base, v, 1.5), ValidationError);
    CHECK_THROWS_AS(perturb_multistep(base, v, 0), ValidationError);
    CHECK_THROWS_AS(perturb_first_order(base, Eigen::MatrixXd::Zero(3, 3), 0.5), ValidationError);
}

TEST_CASE("debug dump round-trips") {
    const SpectralDecomposition d = eigendecompose(build_state_system(fixtures::triangle()).matrix);
    const std::string text = spectral_to_json(d);
    CHECK(text.find("[") != std::string::npos);
    const SpectralDecomposition back = spectral_from_json(text);
    CHECK(back.values == d.values);
    CHECK(back.vectors == d.vectors);
    CHECK(back.inverse == d.inverse);
    CHECK_THROWS_AS(spectral_from_json("{\"steps\": 0}"), ParseError);
}

TEST_CASE("spectral error of an exact decomposition against itself is zero") {
    const SpectralDecomposition d = eigendecompose(build_state_system(fixtures::mesh6()).matrix);
    const SpectralError e = spectral_error(d, d);
    CHECK(e.values == 0.0);
    CHECK(e.vectors <= 1e-12);
    CHECK(e.left_vectors <= 1e-12);
}
