#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "pvfc/lmi.hpp"

using namespace pvfc;

namespace {

void expect_mat_near(const Mat& a, const Mat& b, double tol) {
    ASSERT_EQ(a.rows(), b.rows());
    ASSERT_EQ(a.cols(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            EXPECT_NEAR(a(i, j), b(i, j), tol) << "entry (" << i << "," << j << ")";
}

} // namespace

TEST(AffineLmi, ConstantNegativeIdentityHasMarginMinusOne) {
    AffineLmi lmi(2);
    lmi.add_constant(Mat::identity(2) * -1.0);
    std::vector<double> x; // no variables referenced
    EXPECT_NEAR(lmi.margin(x), -1.0, 1e-14);
}

TEST(AffineLmi, DiagonalAffineFamilyMargins) {
    // M(x) = diag(x - 1, -x - 1)
    VarPool pool;
    const int v = pool.scalar();
    AffineLmi lmi(2);
    lmi.add_constant(Mat{{-1.0, 0.0}, {0.0, -1.0}});
    lmi.add_coeff(v, Mat{{1.0, 0.0}, {0.0, -1.0}});

    std::vector<double> x{0.0};
    EXPECT_NEAR(lmi.margin(x), -1.0, 1e-14);
    x[0] = 0.5;
    EXPECT_NEAR(lmi.margin(x), -0.5, 1e-14);
    x[0] = -2.0;
    EXPECT_NEAR(lmi.margin(x), 1.0, 1e-14);
}

TEST(AffineLmi, ScalarScalingExample) {
    // M(x) = x*I - 2I at x = 3 has margin +1 (infeasible point).
    VarPool pool;
    const int v = pool.scalar();
    AffineLmi lmi(2);
    lmi.add_constant(Mat::identity(2) * -2.0);
    lmi.add_coeff(v, Mat::identity(2));
    std::vector<double> x{3.0};
    EXPECT_NEAR(lmi.margin(x), 1.0, 1e-14);
}

TEST(AffineLmi, SymPairMatchesDirectProduct) {
    // add_sym_pair(X, M, N) must assemble M*X*N + (M*X*N)'.
    VarPool pool;
    SymVar X = SymVar::make(pool, 2);
    const Mat m{{1.0, 2.0}, {3.0, 4.0}};
    const Mat xval{{2.0, 1.0}, {1.0, 4.0}};

    AffineLmi lmi(2);
    lmi.add_sym_pair(X, m, Mat::identity(2));

    std::vector<double> assign(static_cast<std::size_t>(pool.count()), 0.0);
    X.store(assign, xval);

    const Mat direct = m * xval + (m * xval).transposed();
    expect_mat_near(lmi.assemble(assign), direct, 1e-13);
}

TEST(AffineLmi, RectPairMatchesDirectProduct) {
    // -(L*C + C'*L') for a 2x1 variable L and row C.
    VarPool pool;
    RectVar L = RectVar::make(pool, 2, 1);
    const Mat c{{1.0, 0.0}};
    const Mat lval{{3.0}, {2.0}};

    AffineLmi lmi(2);
    lmi.add_rect_pair(L, Mat::identity(2) * -1.0, c);

    std::vector<double> assign(static_cast<std::size_t>(pool.count()), 0.0);
    L.store(assign, lval);

    const Mat direct = (lval * c) * -1.0 + ((lval * c) * -1.0).transposed();
    expect_mat_near(lmi.assemble(assign), direct, 1e-13);
}

TEST(AffineLmi, OffDiagonalBlockEmbedding) {
    // Place K*B into the (0..1, 2) block of a 3x3 matrix, plus its mirror.
    VarPool pool;
    SymVar K = SymVar::make(pool, 2);
    const Mat b{{0.0}, {1.0}};
    const Mat kval{{5.0, -1.0}, {-1.0, 2.0}};

    const Mat e0 = AffineLmi::embed_rows(3, 2, 0);
    const Mat e1 = AffineLmi::embed_rows(3, 1, 2);
    AffineLmi lmi(3);
    lmi.add_sym_pair(K, e0, b * e1.transposed());

    std::vector<double> assign(static_cast<std::size_t>(pool.count()), 0.0);
    K.store(assign, kval);

    const Mat kb = kval * b; // [-1; 2]
    Mat expected(3, 3);
    expected(0, 2) = kb(0, 0);
    expected(1, 2) = kb(1, 0);
    expected(2, 0) = kb(0, 0);
    expected(2, 1) = kb(1, 0);
    expect_mat_near(lmi.assemble(assign), expected, 1e-13);
}

TEST(AffineLmi, SymVarStoreLoadRoundTrip) {
    VarPool pool;
    SymVar s = SymVar::make(pool, 3);
    const Mat v{{1.0, 2.0, 3.0}, {2.0, 5.0, -1.0}, {3.0, -1.0, 9.0}};
    std::vector<double> x(static_cast<std::size_t>(pool.count()), 0.0);
    s.store(x, v);
    expect_mat_near(s.value(x), v, 0.0);
}

TEST(AffineLmi, RectVarStoreLoadRoundTrip) {
    VarPool pool;
    RectVar r = RectVar::make(pool, 2, 3);
    const Mat v{{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}};
    std::vector<double> x(static_cast<std::size_t>(pool.count()), 0.0);
    r.store(x, v);
    expect_mat_near(r.value(x), v, 0.0);
}

TEST(AffineLmi, UnassignedVariableThrows) {
    VarPool pool;
    const int v0 = pool.scalar();
    const int v1 = pool.scalar();
    AffineLmi lmi(1);
    lmi.add_coeff(v0, Mat{{1.0}});
    lmi.add_coeff(v1, Mat{{1.0}});

    std::vector<double> tooShort{1.0}; // v1 missing
    EXPECT_THROW(lmi.assemble(tooShort), IncompleteAssignment);

    std::vector<double> withNan{1.0, std::nan("")};
    EXPECT_THROW(lmi.assemble(withNan), IncompleteAssignment);

    std::vector<double> ok{1.0, 2.0};
    EXPECT_NO_THROW(lmi.assemble(ok));
}

TEST(AffineLmi, RejectsAsymmetricCoefficient) {
    VarPool pool;
    const int v = pool.scalar();
    AffineLmi lmi(2);
    EXPECT_THROW(lmi.add_coeff(v, Mat{{0.0, 1.0}, {0.0, 0.0}}), InvalidInput);
    EXPECT_THROW(lmi.add_constant(Mat{{0.0, 1.0}, {0.0, 0.0}}), InvalidInput);
    EXPECT_THROW(lmi.add_constant(Mat::identity(3)), InvalidInput);
}

TEST(AffineLmi, RepeatedCoefficientsAccumulate) {
    VarPool pool;
    const int v = pool.scalar();
    AffineLmi lmi(1);
    lmi.add_coeff(v, Mat{{1.0}});
    lmi.add_coeff(v, Mat{{2.0}});
    std::vector<double> x{2.0};
    EXPECT_NEAR(lmi.assemble(x)(0, 0), 6.0, 1e-15);
}

TEST(AffineLmi, MarginOfDiagonalAssemblyIsMaxDiagonal) {
    VarPool pool;
    const int v = pool.scalar();
    AffineLmi lmi(3);
    Mat d(3, 3);
    d(0, 0) = -3.0;
    d(1, 1) = -7.0;
    d(2, 2) = -0.25;
    lmi.add_constant(d);
    lmi.add_coeff(v, Mat::identity(3));
    std::vector<double> x{0.125};
    EXPECT_NEAR(lmi.margin(x), -0.125, 1e-13);
}

TEST(AffineLmi, DimensionCapEnforced) {
    EXPECT_THROW(AffineLmi(0), InvalidInput);
    EXPECT_THROW(AffineLmi(9), InvalidInput);
    EXPECT_NO_THROW(AffineLmi(8));
}
