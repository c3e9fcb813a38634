#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace pcf;
using pcf::testing::Gen;
using pcf::testing::rel_fro;

namespace {

CMatrix cm(std::initializer_list<std::initializer_list<double>> rows) {
    RMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index r = 0;
    for (const auto& row : rows) {
        Eigen::Index c = 0;
        for (double v : row) m(r, c++) = v;
        ++r;
    }
    return m.cast<Complex>();
}

}  // namespace

TEST(HermitianMatrix, RejectsAsymmetricInput) {
    CMatrix m = cm({{1, 2}, {3, 1}});
    EXPECT_THROW(HermitianMatrix{m}, Error);
    try {
        HermitianMatrix h{m};
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::not_hermitian);
    }
}

TEST(HermitianMatrix, ConjugateSymmetryAccepted) {
    CMatrix m(2, 2);
    m << Complex(1, 0), Complex(0.5, 0.25), Complex(0.5, -0.25), Complex(2, 0);
    const HermitianMatrix h(m);
    EXPECT_EQ(h(0, 1), std::conj(h(1, 0)));
}

TEST(HermitianMatrix, DiagonalImaginaryPartsZeroed) {
    CMatrix m(1, 1);
    m(0, 0) = Complex(3.0, 1e-13);
    EXPECT_EQ(HermitianMatrix(m)(0, 0).imag(), 0.0);
}

TEST(HermitianEig, ScaledIdentity) {
    const auto eig = hermitian_eig(HermitianMatrix(cm({{2, 0, 0}, {0, 2, 0}, {0, 0, 2}})));
    EXPECT_NEAR(eig.eigenvalues(0), 2.0, 1e-14);
    EXPECT_NEAR(eig.eigenvalues(1), 2.0, 1e-14);
    EXPECT_NEAR(eig.eigenvalues(2), 2.0, 1e-14);
    EXPECT_LT((eig.eigenvectors.adjoint() * eig.eigenvectors - CMatrix::Identity(3, 3)).norm(), 1e-12);
}

TEST(HermitianEig, DiagonalSortedNonincreasing) {
    const auto eig = hermitian_eig(HermitianMatrix(cm({{1, 0}, {0, 4}})));
    EXPECT_NEAR(eig.eigenvalues(0), 4.0, 1e-14);
    EXPECT_NEAR(eig.eigenvalues(1), 1.0, 1e-14);
    // leading eigenvector is e_2 up to phase
    EXPECT_NEAR(std::abs(eig.eigenvectors(1, 0)), 1.0, 1e-12);
}

TEST(HermitianEig, TwoByTwoByHand) {
    // det([[2-l,1],[1,2-l]]) = (2-l)^2 - 1 -> l = 3, 1
    const auto eig = hermitian_eig(HermitianMatrix(cm({{2, 1}, {1, 2}})));
    EXPECT_NEAR(eig.eigenvalues(0), 3.0, 1e-13);
    EXPECT_NEAR(eig.eigenvalues(1), 1.0, 1e-13);
    const double r = 1.0 / std::sqrt(2.0);
    EXPECT_NEAR(std::abs(eig.eigenvectors.col(0).dot(Eigen::Vector2cd(r, r))), 1.0, 1e-12);
    EXPECT_NEAR(std::abs(eig.eigenvectors.col(1).dot(Eigen::Vector2cd(r, -r))), 1.0, 1e-12);
}

TEST(HermitianEig, RankDetection) {
    Gen g(11);
    const HermitianMatrix s = g.psd(6, 3);
    const auto eig = hermitian_eig(s);
    EXPECT_EQ(eig.rank, 3);
    EXPECT_EQ(eig.eigenvalues(3), 0.0);
    EXPECT_EQ(eig.eigenvalues(5), 0.0);
}

TEST(HermitianEig, EmptyInputRejected) {
    try {
        hermitian_eig(HermitianMatrix(CMatrix(0, 0)));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::empty_input);
    }
}

TEST(HermitianEig, ReconstructionPropertyRandom) {
    Gen g(2024);
    for (Eigen::Index n : {1, 2, 5, 17, 32, 64}) {
        for (int rep = 0; rep < 3; ++rep) {
            const HermitianMatrix s = g.hermitian(n);
            const auto eig = hermitian_eig(s, 0.0);
            EXPECT_LE(rel_fro(eig.reconstruct(), s.matrix()), 1e-10) << "n=" << n;
            for (Eigen::Index i = 1; i < n; ++i) EXPECT_GE(eig.eigenvalues(i - 1), eig.eigenvalues(i));
            for (Eigen::Index i = 0; i < n; ++i) EXPECT_NEAR(eig.eigenvectors.col(i).norm(), 1.0, 1e-12);
        }
    }
}

TEST(InvSqrt, ScaledIdentity) {
    const auto u = inv_sqrt_hermitian(HermitianMatrix(cm({{4, 0}, {0, 4}})));
    EXPECT_LT((u.matrix() - 0.5 * CMatrix::Identity(2, 2)).norm(), 1e-14);
}

TEST(InvSqrt, Diagonal) {
    const auto u = inv_sqrt_hermitian(HermitianMatrix(cm({{4, 0}, {0, 9}})));
    EXPECT_NEAR(u(0, 0).real(), 0.5, 1e-14);
    EXPECT_NEAR(u(1, 1).real(), 1.0 / 3.0, 1e-14);
    EXPECT_NEAR(std::abs(u(0, 1)), 0.0, 1e-14);
}

TEST(InvSqrt, TwoByTwoByHand) {
    // U = P+/sqrt(3) + P-, P+- = ([[1,+-1],[+-1,1]])/2
    const auto u = inv_sqrt_hermitian(HermitianMatrix(cm({{2, 1}, {1, 2}})));
    const double diag = 0.5 * (1.0 / std::sqrt(3.0) + 1.0);
    const double off = 0.5 * (1.0 / std::sqrt(3.0) - 1.0);
    EXPECT_NEAR(u(0, 0).real(), diag, 1e-12);
    EXPECT_NEAR(u(0, 1).real(), off, 1e-12);
    EXPECT_NEAR(u(0, 0).real(), 0.7887, 1e-3);
    EXPECT_NEAR(u(0, 1).real(), -0.2113, 1e-3);
}

TEST(InvSqrt, RejectsIndefinite) {
    try {
        inv_sqrt_hermitian(HermitianMatrix(cm({{1, 0}, {0, -1}})));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::not_psd);
    }
}

TEST(InvSqrt, ProjectsOntoColumnSpace) {
    Gen g(5);
    const HermitianMatrix s = g.psd(7, 4);
    const CMatrix u = inv_sqrt_hermitian(s).matrix();
    const CMatrix proj = u * s.matrix() * u;
    EXPECT_LT((proj * proj - proj).norm(), 1e-8);
    EXPECT_NEAR(proj.trace().real(), 4.0, 1e-8);
    EXPECT_LT((proj * s.matrix() - s.matrix()).norm(), 1e-8 * s.matrix().norm());
}

TEST(MoorePenrose, Identity) {
    const auto g = moore_penrose(HermitianMatrix::identity(4));
    EXPECT_LT((g.matrix() - CMatrix::Identity(4, 4)).norm(), 1e-14);
}

TEST(MoorePenrose, SingularDiagonal) {
    const auto g = moore_penrose(HermitianMatrix(cm({{2, 0}, {0, 0}})));
    EXPECT_NEAR(g(0, 0).real(), 0.5, 1e-15);
    EXPECT_EQ(std::abs(g(1, 1)), 0.0);
}

TEST(MoorePenrose, RankOneProjector) {
    const double r = 1.0 / std::sqrt(2.0);
    const Eigen::Vector2cd v(r, r);
    const CMatrix vv = v * v.adjoint();
    const auto g = moore_penrose(HermitianMatrix::symmetrized(vv));
    EXPECT_LT((g.matrix() - vv).norm(), 1e-12);
}

TEST(MoorePenrose, FourConditionsRandomPsd) {
    Gen g(77);
    for (Eigen::Index n : {3, 8, 16, 32}) {
        for (Eigen::Index rank : {n, n / 2 + 1, Eigen::Index{1}}) {
            const HermitianMatrix s = g.psd(n, rank);
            const CMatrix a = s.matrix();
            const CMatrix p = moore_penrose(s).matrix();
            EXPECT_LE(rel_fro(a * p * a, a), 1e-8);
            EXPECT_LE(rel_fro(p * a * p, p), 1e-8);
            EXPECT_LE(rel_fro((a * p).adjoint(), a * p), 1e-8);
            EXPECT_LE(rel_fro((p * a).adjoint(), p * a), 1e-8);
            // agrees with an SVD-based pseudo-inverse
            EXPECT_LE(rel_fro(p, pcf::testing::svd_pinv(a)), 1e-8);
            EXPECT_TRUE(is_reflexive_ginverse(a, p, 1e-8).reflexive);
        }
    }
}

TEST(InvSqrt, SquareEqualsMoorePenrose) {
    Gen g(99);
    for (Eigen::Index n = 1; n <= 32; n += 5) {
        const HermitianMatrix s = (n % 2 == 0) ? g.psd(n, n / 2 + 1) : g.pd(n);
        const CMatrix u = inv_sqrt_hermitian(s).matrix();
        EXPECT_LE(rel_fro(u * u, moore_penrose(s).matrix()), 1e-8) << "n=" << n;
    }
}

TEST(ReflexiveCheck, IdentityPair) {
    const auto c = is_reflexive_ginverse(HermitianMatrix::identity(3), HermitianMatrix::identity(3), 1e-12);
    EXPECT_TRUE(c.reflexive);
    EXPECT_EQ(c.aga_residual, 0.0);
    EXPECT_EQ(c.gag_residual, 0.0);
}

TEST(ReflexiveCheck, SingularDiagonalPair) {
    const auto c = is_reflexive_ginverse(cm({{2, 0}, {0, 0}}), cm({{0.5, 0}, {0, 0}}), 1e-12);
    EXPECT_TRUE(c.reflexive);
}

TEST(ReflexiveCheck, FirstIdentityAloneIsNotEnough) {
    // AGA = diag(2,0) = A, but GAG = diag(0.5,0) != diag(0.5,1)
    const auto c = is_reflexive_ginverse(cm({{2, 0}, {0, 0}}), cm({{0.5, 0}, {0, 1}}), 1e-8);
    EXPECT_FALSE(c.reflexive);
    EXPECT_EQ(c.aga_residual, 0.0);
    EXPECT_GT(c.gag_residual, 0.5);
}

TEST(ReflexiveCheck, DimensionMismatch) {
    try {
        is_reflexive_ginverse(CMatrix::Identity(2, 3), CMatrix::Identity(2, 3), 1e-8);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::dimension_mismatch);
    }
}

TEST(DirectPartialCoherence, IdentityIsUncorrelated) {
    const auto p = direct_partial_coherence(HermitianMatrix::identity(5));
    EXPECT_LT((p.matrix() - CMatrix::Identity(5, 5)).norm(), 1e-14);
}

TEST(DirectPartialCoherence, BivariateByHand) {
    // inv([[1,.5],[.5,1]]) = [[1,-.5],[-.5,1]]/0.75 -> normalized off-diagonal -0.5
    const auto p = direct_partial_coherence(HermitianMatrix(cm({{1, 0.5}, {0.5, 1}})));
    EXPECT_NEAR(p(0, 1).real(), -0.5, 1e-14);
    EXPECT_NEAR(p(0, 1).imag(), 0.0, 1e-14);
    EXPECT_EQ(p(0, 0).real(), 1.0);
    EXPECT_EQ(p(1, 1).real(), 1.0);
}

TEST(DirectPartialCoherence, SingularRejected) {
    try {
        direct_partial_coherence(HermitianMatrix(cm({{1, 1}, {1, 1}})));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::rank_deficient);
    }
}

TEST(DirectPartialCoherence, BoundsAndUnitDiagonalRandom) {
    Gen g(3);
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::Index n = 2 + rep % 10;
        const auto p = direct_partial_coherence(g.pd(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            EXPECT_EQ(p(i, i), Complex(1.0, 0.0));
            for (Eigen::Index j = 0; j < n; ++j) {
                EXPECT_LE(std::abs(p(i, j)), 1.0 + 1e-12);
                EXPECT_EQ(p(i, j), std::conj(p(j, i)));
            }
        }
    }
}
