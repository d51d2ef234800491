#include <gtest/gtest.h>

#include <random>

#include "pvfc/matrix.hpp"

using namespace pvfc;

TEST(Mat, BasicAlgebra) {
    Mat a{{1.0, 2.0}, {3.0, 4.0}};
    Mat b{{5.0, 6.0}, {7.0, 8.0}};
    Mat c = a * b;
    EXPECT_DOUBLE_EQ(c(0, 0), 19.0);
    EXPECT_DOUBLE_EQ(c(0, 1), 22.0);
    EXPECT_DOUBLE_EQ(c(1, 0), 43.0);
    EXPECT_DOUBLE_EQ(c(1, 1), 50.0);

    Mat d = a.transposed();
    EXPECT_DOUBLE_EQ(d(0, 1), 3.0);
    EXPECT_DOUBLE_EQ((a + b)(1, 1), 12.0);
    EXPECT_DOUBLE_EQ((b - a)(0, 0), 4.0);
    EXPECT_DOUBLE_EQ((2.0 * a)(1, 0), 6.0);
}

TEST(Mat, RejectsOversizeAndShapeMismatch) {
    EXPECT_THROW(Mat(9, 2), InvalidInput);
    Mat a(2, 3), b(2, 2);
    EXPECT_THROW(a + b, InvalidInput);
    EXPECT_THROW(a * a, InvalidInput);
}

TEST(SymMatrix, RejectsAsymmetry) {
    EXPECT_THROW(SymMatrix({{1.0, 2.0}, {2.1, 1.0}}), InvalidInput);
    EXPECT_THROW(SymMatrix(Mat(2, 3)), InvalidInput);
    // Tiny asymmetry within the relative tolerance is absorbed.
    Mat m{{1.0, 2.0}, {2.0 + 1e-13, 1.0}};
    SymMatrix s(m);
    EXPECT_DOUBLE_EQ(s(0, 1), s(1, 0));
}

TEST(Eig, KnownTwoByTwo) {
    // Characteristic polynomial x^2 - 4x + 3 has roots 1 and 3.
    const auto ex = sym_eig_extremes(SymMatrix({{2.0, 1.0}, {1.0, 2.0}}));
    EXPECT_NEAR(ex.min, 1.0, 1e-9);
    EXPECT_NEAR(ex.max, 3.0, 1e-9);
}

TEST(Eig, DiagonalAndScalar) {
    const auto ex = sym_eig_extremes(SymMatrix({{-4.0, 0.0}, {0.0, 7.0}}));
    EXPECT_NEAR(ex.min, -4.0, 1e-12);
    EXPECT_NEAR(ex.max, 7.0, 1e-12);

    const auto one = sym_eig_extremes(SymMatrix({{5.5}}));
    EXPECT_DOUBLE_EQ(one.min, 5.5);
    EXPECT_DOUBLE_EQ(one.max, 5.5);
}

// Eigenvalues are invariant under permutation similarity, and the trace
// equals their sum. Random symmetric matrices up to the 8x8 capacity.
TEST(Eig, PermutationInvarianceAndTrace) {
    std::mt19937 rng(12345);
    std::uniform_real_distribution<double> u(-10.0, 10.0);

    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(rng() % 7);
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) {
                const double v = u(rng);
                m(i, j) = v;
                m(j, i) = v;
            }
        SymMatrix s(m);
        const auto ev = jacobi_eigenvalues(s);

        double sum = 0.0;
        for (double e : ev) sum += e;
        EXPECT_NEAR(sum, m.trace(), 1e-9 * (1.0 + std::fabs(m.trace())));

        // Random permutation P: eigenvalues of P A P^T match.
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        std::shuffle(perm.begin(), perm.end(), rng);
        Mat pm(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) pm(i, j) = m(perm[i], perm[j]);
        const auto ev2 = jacobi_eigenvalues(SymMatrix(pm));
        for (std::size_t i = 0; i < n; ++i)
            EXPECT_NEAR(ev[i], ev2[i], 1e-8 * (1.0 + std::fabs(ev[i])));
    }
}

// Jacobi accuracy against an analytically solvable family:
// rank-one update a*I + b*ones has eigenvalues {a (n-1 times), a + n*b}.
TEST(Eig, RankOneFamily) {
    for (std::size_t n = 2; n <= 8; ++n) {
        const double a = 2.5, b = -0.75;
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) m(i, j) = b + (i == j ? a : 0.0);
        const auto ex = sym_eig_extremes(SymMatrix(m));
        const double shifted = a + static_cast<double>(n) * b;
        EXPECT_NEAR(ex.min, std::min(a, shifted), 1e-10);
        EXPECT_NEAR(ex.max, std::max(a, shifted), 1e-10);
    }
}
