#pragma once

// Dense Hermitian linear algebra: eigendecomposition, inverse square root,
// Moore-Penrose inverse, reflexive g-inverse checks and the textbook
// (full-rank) partial coherence used as an oracle for the field estimator.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "pcf/core.hpp"

namespace pcf {

/// Complex square matrix with conjugate symmetry, validated on construction.
class HermitianMatrix {
public:
    static constexpr double kSymmetryTol = 1e-12;

    HermitianMatrix() = default;

    /// Throws not_hermitian unless m(i,j) == conj(m(j,i)) to kSymmetryTol absolute.
    /// Diagonal imaginary parts (within tolerance) are zeroed.
    explicit HermitianMatrix(CMatrix m) : m_(std::move(m)) {
        detail::require(m_.rows() == m_.cols(), ErrorCode::dimension_mismatch,
                        "Hermitian matrix must be square, got " + detail::dims(m_.rows(), m_.cols()));
        const Eigen::Index n = m_.rows();
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i; j < n; ++j) {
                const Complex a = m_(i, j);
                const Complex b = m_(j, i);
                detail::require(std::isfinite(a.real()) && std::isfinite(a.imag()), ErrorCode::invalid_argument,
                                "non-finite entry in Hermitian matrix");
                detail::require(std::abs(a - std::conj(b)) <= kSymmetryTol, ErrorCode::not_hermitian,
                                "matrix is not Hermitian at (" + std::to_string(i) + "," + std::to_string(j) + ")");
            }
            m_(i, i) = Complex(m_(i, i).real(), 0.0);
        }
    }

    explicit HermitianMatrix(const RMatrix& m) : HermitianMatrix(CMatrix(m.cast<Complex>())) {}

    /// Builds from (m + m*)/2; use for matrices that are Hermitian up to rounding.
    static HermitianMatrix symmetrized(const CMatrix& m) {
        detail::require(m.rows() == m.cols(), ErrorCode::dimension_mismatch,
                        "Hermitian matrix must be square, got " + detail::dims(m.rows(), m.cols()));
        CMatrix h = 0.5 * (m + m.adjoint());
        return HermitianMatrix(std::move(h));
    }

    static HermitianMatrix identity(Eigen::Index n) { return HermitianMatrix(CMatrix(CMatrix::Identity(n, n))); }

    Eigen::Index dim() const noexcept { return m_.rows(); }
    const CMatrix& matrix() const noexcept { return m_; }
    Complex operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

private:
    CMatrix m_;
};

struct EigenDecomposition {
    CMatrix eigenvectors;  // unitary, columns are eigenvectors
    RVector eigenvalues;   // nonincreasing; rank-detected zeros are exactly 0
    Eigen::Index rank = 0;

    /// Gamma * diag(f(lambda)) * Gamma^*.
    template <typename F>
    CMatrix spectral(F&& f) const {
        CVector scale(eigenvalues.size());
        for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
            scale(i) = Complex(f(eigenvalues(i)), 0.0);
        }
        return eigenvectors * scale.asDiagonal() * eigenvectors.adjoint();
    }

    CMatrix reconstruct() const {
        return spectral([](double l) { return l; });
    }
};

/// Eigendecomposition of a Hermitian matrix, eigenvalues nonincreasing.
/// Eigenvalues with |lambda| <= tol * max|lambda| are reported as zero.
inline EigenDecomposition hermitian_eig(const HermitianMatrix& s, double tol = kDefaultRankTol) {
    detail::require(s.dim() > 0, ErrorCode::empty_input, "eigendecomposition of an empty matrix");
    detail::require(tol >= 0.0, ErrorCode::invalid_argument, "rank tolerance must be nonnegative");

    Eigen::SelfAdjointEigenSolver<CMatrix> solver(s.matrix());
    detail::require(solver.info() == Eigen::Success, ErrorCode::degenerate, "Hermitian eigensolver did not converge");

    // Solver returns ascending order; flip to nonincreasing.
    const Eigen::Index n = s.dim();
    EigenDecomposition out;
    out.eigenvalues = solver.eigenvalues().reverse();
    out.eigenvectors = solver.eigenvectors().rowwise().reverse();

    const double cutoff = tol * out.eigenvalues.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(out.eigenvalues(i)) <= cutoff) {
            out.eigenvalues(i) = 0.0;
        } else {
            ++out.rank;
        }
    }
    return out;
}

namespace detail {

inline void require_psd(const EigenDecomposition& eig) {
    // Negative eigenvalues that survive rank detection exceed tol * max|lambda|.
    const double lowest = eig.eigenvalues.minCoeff();
    require(lowest >= 0.0, ErrorCode::not_psd,
            "matrix is not positive semidefinite (eigenvalue " + std::to_string(lowest) + ")");
}

}  // namespace detail

/// Hermitian pseudo-inverse square root Gamma Lambda^{-1/2} Gamma^* over the nonzero spectrum.
inline HermitianMatrix inv_sqrt_hermitian(const EigenDecomposition& eig) {
    detail::require_psd(eig);
    return HermitianMatrix::symmetrized(eig.spectral([](double l) { return l > 0.0 ? 1.0 / std::sqrt(l) : 0.0; }));
}

inline HermitianMatrix inv_sqrt_hermitian(const HermitianMatrix& s, double tol = kDefaultRankTol) {
    return inv_sqrt_hermitian(hermitian_eig(s, tol));
}

inline HermitianMatrix moore_penrose(const EigenDecomposition& eig) {
    detail::require_psd(eig);
    return HermitianMatrix::symmetrized(eig.spectral([](double l) { return l > 0.0 ? 1.0 / l : 0.0; }));
}

/// Moore-Penrose inverse of a positive semidefinite Hermitian matrix.
inline HermitianMatrix moore_penrose(const HermitianMatrix& s, double tol = kDefaultRankTol) {
    return moore_penrose(hermitian_eig(s, tol));
}

struct ReflexiveCheck {
    bool reflexive = false;
    double aga_residual = 0.0;  // ||AGA - A||_F / ||A||_F
    double gag_residual = 0.0;  // ||GAG - G||_F / ||G||_F
};

namespace detail {

inline double relative_residual(double diff, double ref) { return ref > 0.0 ? diff / ref : diff; }

}  // namespace detail

/// Checks AGA = A and GAG = G. A is m x n, G is n x m.
inline ReflexiveCheck is_reflexive_ginverse(const CMatrix& a, const CMatrix& g, double tol) {
    detail::require(a.rows() == g.cols() && a.cols() == g.rows(), ErrorCode::dimension_mismatch,
                    "g-inverse dims " + detail::dims(g.rows(), g.cols()) + " do not conform to " +
                        detail::dims(a.rows(), a.cols()));
    ReflexiveCheck out;
    out.aga_residual = detail::relative_residual((a * g * a - a).norm(), a.norm());
    out.gag_residual = detail::relative_residual((g * a * g - g).norm(), g.norm());
    out.reflexive = out.aga_residual <= tol && out.gag_residual <= tol;
    return out;
}

inline ReflexiveCheck is_reflexive_ginverse(const HermitianMatrix& a, const HermitianMatrix& g, double tol) {
    return is_reflexive_ginverse(a.matrix(), g.matrix(), tol);
}

/// P = E Q E with Q = S^{-1}, E = diag(Q)^{-1/2}. Requires S positive definite.
inline HermitianMatrix direct_partial_coherence(const HermitianMatrix& s, double tol = kDefaultRankTol) {
    const EigenDecomposition eig = hermitian_eig(s, tol);
    detail::require(eig.rank == s.dim() && eig.eigenvalues.minCoeff() > 0.0, ErrorCode::rank_deficient,
                    "direct partial coherence needs a positive definite matrix (rank " + std::to_string(eig.rank) +
                        " of " + std::to_string(s.dim()) + "); use the field estimator");

    // Cholesky keeps this route independent of the eigen-based field estimator.
    Eigen::LLT<CMatrix> llt(s.matrix());
    detail::require(llt.info() == Eigen::Success, ErrorCode::rank_deficient, "Cholesky factorization failed");
    const Eigen::Index n = s.dim();
    const CMatrix q = llt.solve(CMatrix::Identity(n, n));

    RVector e(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        e(i) = 1.0 / std::sqrt(q(i, i).real());
    }
    CMatrix p = e.cast<Complex>().asDiagonal() * q * e.cast<Complex>().asDiagonal();
    p = 0.5 * (p + p.adjoint()).eval();
    for (Eigen::Index i = 0; i < n; ++i) {
        p(i, i) = 1.0;
    }
    return HermitianMatrix(std::move(p));
}

}  // namespace pcf
