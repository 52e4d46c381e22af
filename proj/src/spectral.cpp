#include "n1plus/spectral.hpp"

#include "n1plus/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace n1plus {

namespace {

using json = nlohmann::json;

constexpr double kMaxZeroedShare = 0.10;

double inf_norm(const CMatrix& m) {
    return m.rows() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff();
}

double inf_norm(const Eigen::MatrixXd& m) {
    return m.rows() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff();
}

bool too_close(Complex a, Complex b, double gap) {
    const Complex z = a - b;
    const double d2 = z.real() * z.real() + z.imag() * z.imag();
    return d2 < gap * gap || d2 == 0.0;
}

void check_zeroed(std::size_t zeroed, Eigen::Index n) {
    const double pairs = static_cast<double>(n) * static_cast<double>(n - 1);
    if (pairs > 0.0 && static_cast<double>(zeroed) > kMaxZeroedShare * pairs) {
        throw DegeneracyError("perturbation dominated by degenerate eigenvalue pairs (" +
                              std::to_string(zeroed) + " of " +
                              std::to_string(static_cast<long long>(pairs)) +
                              " gap entries zeroed)");
    }
}

// Sine of the angle between two complex vectors, from the residual of projecting b on a.
double sine_angle(const CVector& a, const CVector& b) {
    const double na = a.squaredNorm();
    const double nb = b.squaredNorm();
    if (na == 0.0 || nb == 0.0) {
        return na == nb ? 0.0 : 1.0;
    }
    const CVector r = b - a * (a.dot(b) / na);
    return std::min(1.0, std::sqrt(r.squaredNorm() / nb));
}

json complex_pair(Complex z) {
    return json::array({z.real(), z.imag()});
}

Complex pair_complex(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>()};
}

json matrix_json(const CMatrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back(complex_pair(m(i, j)));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

CMatrix json_matrix(const json& j, Eigen::Index n) {
    if (static_cast<Eigen::Index>(j.size()) != n) {
        throw ParseError("decomposition matrix has the wrong number of rows");
    }
    CMatrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = j.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != n) {
            throw ParseError("decomposition matrix has the wrong number of columns");
        }
        for (Eigen::Index k = 0; k < n; ++k) {
            m(i, k) = pair_complex(row.at(static_cast<std::size_t>(k)));
        }
    }
    return m;
}

// 1/z without the overflow scaling of std::complex division; gaps are never tiny here.
Complex reciprocal(Complex z) {
    const double n2 = z.real() * z.real() + z.imag() * z.imag();
    return {z.real() / n2, -z.imag() / n2};
}

// Fills `pi` with reciprocal gaps and returns the number of zeroed off-diagonal entries.
std::size_t fill_pi(const CVector& values, double gap, CMatrix& pi) {
    const Eigen::Index n = values.size();
    pi.resize(n, n);
    std::size_t zeroed = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (i == j) {
                pi(i, j) = 0.0;
            } else if (too_close(values(i), values(j), gap)) {
                pi(i, j) = 0.0;
                ++zeroed;
            } else {
                pi(i, j) = reciprocal(values(i) - values(j));
            }
        }
    }
    return zeroed;
}

}  // namespace

CMatrix SpectralDecomposition::reconstruct() const {
    return vectors * values.asDiagonal() * inverse;
}

double SpectralDecomposition::biorthogonality_defect() const {
    const Eigen::Index n = dimension();
    return inf_norm(CMatrix(vectors * inverse - CMatrix::Identity(n, n)));
}

double SpectralDecomposition::residual(const Eigen::MatrixXd& a) const {
    return inf_norm(CMatrix(a.cast<Complex>() - reconstruct()));
}

SpectralDecomposition eigendecompose(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) {
        throw ValidationError("eigendecompose needs a square matrix");
    }
    const Eigen::Index n = a.rows();
    SpectralDecomposition dec;
    if (n == 0) {
        return dec;
    }
    if (!a.allFinite()) {
        throw NumericalError("matrix has non-finite entries");
    }
    Eigen::EigenSolver<Eigen::MatrixXd> solver(a, true);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("eigenvalue iteration did not converge");
    }
    const CVector raw_values = solver.eigenvalues();
    const CMatrix raw_vectors = solver.eigenvectors();

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
        const Complex u = raw_values(x);
        const Complex v = raw_values(y);
        return u.real() < v.real() || (u.real() == v.real() && u.imag() < v.imag());
    });

    dec.values.resize(n);
    dec.vectors.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        dec.values(k) = raw_values(order[static_cast<std::size_t>(k)]);
        dec.vectors.col(k) = raw_vectors.col(order[static_cast<std::size_t>(k)]);
    }
    Eigen::PartialPivLU<CMatrix> lu(dec.vectors);
    dec.inverse = lu.inverse();
    if (!dec.inverse.allFinite()) {
        throw NumericalError("eigenvector matrix is singular (matrix not diagonalizable)");
    }

    const double scale = std::max(inf_norm(a), 1.0);
    const double res = dec.residual(a);
    if (!(res <= 1e-6 * scale)) {
        throw NumericalError("matrix is not diagonalizable to working accuracy (residual " +
                             std::to_string(res) + ")");
    }
    return dec;
}

double default_gap(const CVector& values) {
    return values.size() == 0 ? 0.0 : 1e-8 * values.cwiseAbs().maxCoeff();
}

PiPlus pi_plus(const CVector& values, double gap) {
    if (!values.allFinite()) {
        throw NumericalError("eigenvalues are not finite");
    }
    if (gap < 0.0) {
        gap = default_gap(values);
    }
    PiPlus out;
    out.zeroed = fill_pi(values, gap, out.matrix);
    out.degenerate = out.zeroed > 0;
    return out;
}

SpectralDecomposition perturb_first_order(const SpectralDecomposition& base,
                                          const Eigen::MatrixXd& v, double a) {
    const Eigen::Index n = base.dimension();
    if (v.rows() != n || v.cols() != n) {
        throw ValidationError("perturbation size does not match the decomposition");
    }
    if (!(a > 0.0 && a <= 1.0)) {
        throw ValidationError("perturbation scale must lie in (0, 1]");
    }
    SpectralDecomposition out = base;
    out.steps = base.steps + 1;
    if (v.isZero(0.0)) {
        return out;
    }

    const PiPlus pi = pi_plus(base.values);
    check_zeroed(pi.zeroed, n);

    const CMatrix w = base.inverse * v.cast<Complex>() * base.vectors;
    const CMatrix pw = pi.matrix.cwiseProduct(w);
    out.vectors = base.vectors - a * (base.vectors * pw);
    out.values = base.values + a * w.diagonal();
    out.inverse = base.inverse + a * (pw * base.inverse);
    out.degenerate = base.degenerate || pi.degenerate;
    return out;
}

SpectralDecomposition perturb_multistep(const SpectralDecomposition& base,
                                        const Eigen::MatrixXd& v, int m) {
    if (m < 1) {
        throw ValidationError("step count must be at least 1");
    }
    const double a = 1.0 / static_cast<double>(m);
    SpectralDecomposition cur = base;
    for (int k = 0; k < m; ++k) {
        cur = perturb_first_order(cur, v, a);
    }
    cur.steps = base.steps + m;
    return cur;
}

FactoredSpectrum perturb_multistep_rank_one(const SpectralDecomposition& base,
                                            const Eigen::VectorXd& left,
                                            const Eigen::VectorXd& right, int m) {
    if (m < 1) {
        throw ValidationError("step count must be at least 1");
    }
    const Eigen::Index n = base.dimension();
    if (left.size() != n || right.size() != n) {
        throw ValidationError("perturbation size does not match the decomposition");
    }
    FactoredSpectrum f;
    f.base_ = &base;
    f.step_ = 1.0 / static_cast<double>(m);
    f.values_ = base.values;
    f.gap_ = default_gap(base.values);
    f.history_.reserve(static_cast<std::size_t>(m));
    f.l_.reserve(static_cast<std::size_t>(m));
    f.q_.reserve(static_cast<std::size_t>(m));

    CVector l = base.inverse * left.cast<Complex>();
    CVector q = base.vectors.transpose() * right.cast<Complex>();
    CVector s(n);
    const double a = f.step_;
    for (int k = 0; k < m; ++k) {
        // Pi is antisymmetric, so K x = l o (Pi c) and K^T x = -q o (Pi c) with c = l o q.
        const CVector& lam = f.values_;
        const CVector ll = l.cwiseProduct(q);
        std::size_t zeroed = 0;
        s.setZero();
        for (Eigen::Index j = 1; j < n; ++j) {
            const Complex lj = lam(j);
            const Complex cj = ll(j);
            Complex sj = 0.0;
            for (Eigen::Index i = 0; i < j; ++i) {
                if (too_close(lam(i), lj, f.gap_)) {
                    zeroed += 2;
                    continue;
                }
                const Complex p = reciprocal(lam(i) - lj);
                s(i) += p * cj;
                sj -= p * ll(i);
            }
            s(j) += sj;
        }
        check_zeroed(zeroed, n);
        f.degenerate_ = f.degenerate_ || zeroed > 0;
        f.history_.push_back(lam);
        f.l_.push_back(l);
        f.q_.push_back(q);

        l += a * l.cwiseProduct(s);
        q += a * q.cwiseProduct(s);
        f.values_ += a * ll;
    }
    return f;
}

CVector FactoredSpectrum::apply_vectors(const CVector& x) const {
    CVector y = x;
    CMatrix pi;
    for (int k = steps() - 1; k >= 0; --k) {
        const auto ku = static_cast<std::size_t>(k);
        fill_pi(history_[ku], gap_, pi);
        y -= step_ * l_[ku].cwiseProduct(pi * q_[ku].cwiseProduct(y));
    }
    return base_->vectors * y;
}

CMatrix FactoredSpectrum::right_apply_vectors(const CMatrix& rows) const {
    CMatrix y = rows * base_->vectors;
    CMatrix pi;
    for (int k = 0; k < steps(); ++k) {
        const auto ku = static_cast<std::size_t>(k);
        fill_pi(history_[ku], gap_, pi);
        // Y (I - a K) = Y - a ((Y diag(l)) Pi) diag(q)
        const CMatrix t = (y * l_[ku].asDiagonal()) * pi;
        y -= step_ * (t * q_[ku].asDiagonal());
    }
    return y;
}

CVector FactoredSpectrum::apply_inverse(const CVector& x) const {
    CVector y = base_->inverse * x;
    CMatrix pi;
    for (int k = 0; k < steps(); ++k) {
        const auto ku = static_cast<std::size_t>(k);
        fill_pi(history_[ku], gap_, pi);
        y += step_ * l_[ku].cwiseProduct(pi * q_[ku].cwiseProduct(y));
    }
    return y;
}

SpectralDecomposition FactoredSpectrum::materialize() const {
    SpectralDecomposition out;
    out.vectors = right_apply_vectors(CMatrix::Identity(values_.size(), values_.size()));
    out.inverse = base_->inverse;
    CMatrix pi;
    for (int k = 0; k < steps(); ++k) {
        const auto ku = static_cast<std::size_t>(k);
        fill_pi(history_[ku], gap_, pi);
        const CMatrix kmat = l_[ku].asDiagonal() * pi * q_[ku].asDiagonal();
        out.inverse += step_ * (kmat * out.inverse);
    }
    out.values = values_;
    out.steps = base_->steps + steps();
    out.degenerate = base_->degenerate || degenerate_;
    return out;
}

double SpectralError::max() const noexcept {
    return std::max({values, vectors, left_vectors});
}

SpectralError spectral_error(const SpectralDecomposition& approx,
                             const SpectralDecomposition& exact) {
    const Eigen::Index n = exact.dimension();
    if (approx.dimension() != n) {
        throw ValidationError("decompositions have different sizes");
    }
    SpectralError err;
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index best = -1;
        double best_d = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (used[static_cast<std::size_t>(j)]) {
                continue;
            }
            const double d = std::abs(approx.values(j) - exact.values(i));
            if (best < 0 || d < best_d) {
                best = j;
                best_d = d;
            }
        }
        used[static_cast<std::size_t>(best)] = true;
        err.values = std::max(err.values, best_d);
        err.vectors = std::max(err.vectors,
                               sine_angle(approx.vectors.col(best), exact.vectors.col(i)));
        err.left_vectors =
            std::max(err.left_vectors, sine_angle(approx.inverse.row(best).transpose(),
                                                  exact.inverse.row(i).transpose()));
    }
    return err;
}

std::string spectral_to_json(const SpectralDecomposition& dec) {
    json j;
    j["steps"] = dec.steps;
    j["degenerate"] = dec.degenerate;
    json values = json::array();
    for (Eigen::Index k = 0; k < dec.values.size(); ++k) {
        values.push_back(complex_pair(dec.values(k)));
    }
    j["values"] = std::move(values);
    j["vectors"] = matrix_json(dec.vectors);
    j["inverse"] = matrix_json(dec.inverse);
    return j.dump();
}

SpectralDecomposition spectral_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("decomposition is not valid JSON: ") + e.what());
    }
    try {
        SpectralDecomposition dec;
        dec.steps = j.at("steps").get<int>();
        dec.degenerate = j.value("degenerate", false);
        const auto& values = j.at("values");
        const auto n = static_cast<Eigen::Index>(values.size());
        dec.values.resize(n);
        for (Eigen::Index k = 0; k < n; ++k) {
            dec.values(k) = pair_complex(values.at(static_cast<std::size_t>(k)));
        }
        dec.vectors = json_matrix(j.at("vectors"), n);
        dec.inverse = json_matrix(j.at("inverse"), n);
        return dec;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad decomposition document: ") + e.what());
    }
}

}  // namespace n1plus
