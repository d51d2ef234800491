#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include "pvfc/errors.hpp"

namespace pvfc {

// Dense row-major matrix for control-law algebra. Capacity is fixed at 8x8
// so everything lives on the stack; dimensions are runtime values because
// the LMI blocks range from 1x1 to 6x6.
class Mat {
  public:
    static constexpr std::size_t kCap = 8;

    Mat() : rows_(0), cols_(0) { a_.fill(0.0); }

    Mat(std::size_t r, std::size_t c) : rows_(r), cols_(c) {
        check_dims(r, c);
        a_.fill(0.0);
    }

    Mat(std::initializer_list<std::initializer_list<double>> rows)
        : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
        check_dims(rows_, cols_);
        a_.fill(0.0);
        std::size_t i = 0;
        for (const auto& row : rows) {
            if (row.size() != cols_)
                throw InvalidInput("Mat: ragged initializer");
            std::size_t j = 0;
            for (double v : row) (*this)(i, j++) = v;
            ++i;
        }
    }

    static Mat zeros(std::size_t r, std::size_t c) { return Mat(r, c); }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return a_[i * kCap + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * kCap + j]; }

    Mat operator+(const Mat& o) const {
        require_same_shape(o);
        Mat r(rows_, cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) r(i, j) = (*this)(i, j) + o(i, j);
        return r;
    }

    Mat operator-(const Mat& o) const {
        require_same_shape(o);
        Mat r(rows_, cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) r(i, j) = (*this)(i, j) - o(i, j);
        return r;
    }

    Mat operator*(const Mat& o) const {
        if (cols_ != o.rows_) throw InvalidInput("Mat: product shape mismatch");
        Mat r(rows_, o.cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = 0; k < cols_; ++k) {
                const double v = (*this)(i, k);
                if (v == 0.0) continue;
                for (std::size_t j = 0; j < o.cols_; ++j) r(i, j) += v * o(k, j);
            }
        return r;
    }

    Mat operator*(double s) const {
        Mat r(rows_, cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) r(i, j) = (*this)(i, j) * s;
        return r;
    }

    friend Mat operator*(double s, const Mat& m) { return m * s; }

    Mat& operator+=(const Mat& o) { return *this = *this + o; }

    Mat transposed() const {
        Mat r(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) r(j, i) = (*this)(i, j);
        return r;
    }

    double max_abs() const {
        double m = 0.0;
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j)
                m = std::max(m, std::fabs((*this)(i, j)));
        return m;
    }

    bool is_finite() const {
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j)
                if (!std::isfinite((*this)(i, j))) return false;
        return true;
    }

    double trace() const {
        double t = 0.0;
        for (std::size_t i = 0; i < rows_ && i < cols_; ++i) t += (*this)(i, i);
        return t;
    }

  private:
    static void check_dims(std::size_t r, std::size_t c) {
        if (r > kCap || c > kCap)
            throw InvalidInput("Mat: dimension exceeds capacity 8");
    }
    void require_same_shape(const Mat& o) const {
        if (rows_ != o.rows_ || cols_ != o.cols_)
            throw InvalidInput("Mat: shape mismatch");
    }

    std::size_t rows_, cols_;
    std::array<double, kCap * kCap> a_;
};

// Square symmetric matrix. Symmetry is checked on construction against a
// 1e-12 relative tolerance and then made exact by averaging, so downstream
// eigen work never sees drift from accumulated rounding.
class SymMatrix {
  public:
    explicit SymMatrix(const Mat& m) : m_(m) {
        if (m.rows() != m.cols())
            throw InvalidInput("SymMatrix: not square");
        const double scale = std::max(1e-300, m.max_abs());
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = i + 1; j < m.cols(); ++j) {
                if (std::fabs(m(i, j) - m(j, i)) > 1e-12 * scale)
                    throw InvalidInput("SymMatrix: asymmetric input");
                const double avg = 0.5 * (m(i, j) + m(j, i));
                m_(i, j) = avg;
                m_(j, i) = avg;
            }
    }

    SymMatrix(std::initializer_list<std::initializer_list<double>> rows)
        : SymMatrix(Mat(rows)) {}

    std::size_t dim() const { return m_.rows(); }
    double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
    const Mat& mat() const { return m_; }

  private:
    Mat m_;
};

struct EigExtremes {
    double min;
    double max;
};

// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
// ascending. Dimensions <= 8 converge in a handful of sweeps.
inline std::vector<double> jacobi_eigenvalues(const SymMatrix& s) {
    const std::size_t n = s.dim();
    if (n == 0) throw InvalidInput("jacobi: empty matrix");
    Mat a = s.mat();

    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0, diag = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            diag += a(i, i) * a(i, i);
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        }
        if (off <= 1e-28 * (diag + off) || off == 0.0) break;

        for (std::size_t p = 0; p < n - 1; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                // Smaller-magnitude root keeps the rotation angle <= 45 deg.
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                const double tau = sn / (1.0 + c);

                const double apq = a(p, q);
                a(p, p) -= t * apq;
                a(q, q) += t * apq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = akp - sn * (akq + tau * akp);
                    a(p, k) = a(k, p);
                    a(k, q) = akq + sn * (akp - tau * akq);
                    a(q, k) = a(k, q);
                }
            }
        }
    }

    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

inline EigExtremes sym_eig_extremes(const SymMatrix& s) {
    const auto ev = jacobi_eigenvalues(s);
    return {ev.front(), ev.back()};
}

} // namespace pvfc
