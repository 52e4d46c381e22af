#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace n1plus {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// A = U diag(values) U^-1. `steps` is 0 for an exact decomposition and m for an
/// m-step perturbative one.
struct SpectralDecomposition {
    CMatrix vectors;
    CVector values;
    CMatrix inverse;
    int steps = 0;
    bool degenerate = false;

    bool is_exact() const noexcept { return steps == 0; }
    Eigen::Index dimension() const noexcept { return values.size(); }

    CVector to_modal(const Eigen::VectorXd& x) const { return inverse * x.cast<Complex>(); }
    /// Real part of U xi.
    Eigen::VectorXd from_modal(const CVector& xi) const { return (vectors * xi).real(); }
    CMatrix reconstruct() const;
    /// ||U U^-1 - I||_inf
    double biorthogonality_defect() const;
    /// ||A - U diag(values) U^-1||_inf
    double residual(const Eigen::MatrixXd& a) const;
};

/// Eigen-decomposition with eigenvalues sorted by (Re, Im). Throws NumericalError when the
/// reconstruction residual exceeds 1e-6 ||A||_inf.
SpectralDecomposition eigendecompose(const Eigen::MatrixXd& a);

/// Default eigenvalue gap below which a pair counts as degenerate: 1e-8 max|lambda|.
double default_gap(const CVector& values);

struct PiPlus {
    CMatrix matrix;
    std::size_t zeroed = 0;
    bool degenerate = false;
};

/// Reciprocal eigenvalue gaps 1/(lambda_i - lambda_j) off the diagonal. A negative `gap`
/// selects default_gap(values).
PiPlus pi_plus(const CVector& values, double gap = -1.0);

/// One first-order update of `base` towards A + a V. Throws DegeneracyError when more
/// than 10% of the off-diagonal gap entries had to be zeroed.
SpectralDecomposition perturb_first_order(const SpectralDecomposition& base,
                                          const Eigen::MatrixXd& v, double a);

/// m first-order updates of size 1/m, each fed the previous output.
SpectralDecomposition perturb_multistep(const SpectralDecomposition& base,
                                        const Eigen::MatrixXd& v, int m);

/// Multistep update for a rank-one perturbation V = left right^T, kept in factored form.
///
/// The k-th step multiplies U by (I - a K_k) and U^-1 by (I + a K_k) from the left, with
/// K_k = diag(l_k) Pi_k diag(q_k), l_k = U_k^-1 left, q_k = U_k^T right. Only the step
/// vectors are stored, so one step costs O(N^2) instead of O(N^3).
class FactoredSpectrum {
public:
    const CVector& values() const noexcept { return values_; }
    int steps() const noexcept { return static_cast<int>(l_.size()); }
    bool degenerate() const noexcept { return degenerate_; }

    /// U_m x and U_m X.
    CVector apply_vectors(const CVector& x) const;
    /// X U_m for a row block X.
    CMatrix right_apply_vectors(const CMatrix& rows) const;
    /// U_m^-1 x
    CVector apply_inverse(const CVector& x) const;

    SpectralDecomposition materialize() const;

private:
    friend FactoredSpectrum perturb_multistep_rank_one(const SpectralDecomposition&,
                                                       const Eigen::VectorXd&,
                                                       const Eigen::VectorXd&, int);
    const SpectralDecomposition* base_ = nullptr;
    double step_ = 1.0;
    CVector values_;
    std::vector<CVector> history_;  // eigenvalues before each step
    std::vector<CVector> l_;
    std::vector<CVector> q_;
    double gap_ = 0.0;
    bool degenerate_ = false;
};

/// `base` must outlive the returned object.
FactoredSpectrum perturb_multistep_rank_one(const SpectralDecomposition& base,
                                            const Eigen::VectorXd& left,
                                            const Eigen::VectorXd& right, int m);

/// Errors of an approximate decomposition against an exact one. Eigenvalues are paired by
/// greedy nearest matching; vector errors are sines of the angle between paired
/// eigenvectors (columns of U) and left eigenvectors (rows of U^-1).
struct SpectralError {
    double values = 0.0;
    double vectors = 0.0;
    double left_vectors = 0.0;

    double max() const noexcept;
};

SpectralError spectral_error(const SpectralDecomposition& approx,
                             const SpectralDecomposition& exact);

/// Debug dump with complex entries as [re, im] pairs.
std::string spectral_to_json(const SpectralDecomposition& dec);
SpectralDecomposition spectral_from_json(std::string_view text);

}  // namespace n1plus
