#pragma once

#include <cmath>
#include <map>
#include <span>
#include <vector>

#include "pvfc/errors.hpp"
#include "pvfc/matrix.hpp"

namespace pvfc {

// ---------------------------------------------------------------------------
// Decision variables.
//
// Everything is flattened to scalar decision variables identified by global
// ids. Structured (symmetric / rectangular) matrix variables are views over
// a contiguous id range plus shape metadata, so symmetry is enforced by
// construction rather than by constraint.
// ---------------------------------------------------------------------------

class VarPool {
  public:
    int scalar() { return next_++; }

    std::vector<int> block(std::size_t count) {
        std::vector<int> ids(count);
        for (auto& id : ids) id = next_++;
        return ids;
    }

    int count() const { return next_; }

  private:
    int next_ = 0;
};

// Symmetric n x n matrix variable: n(n+1)/2 scalars, upper triangle row-major.
struct SymVar {
    std::size_t n = 0;
    std::vector<int> ids;

    static SymVar make(VarPool& pool, std::size_t n) {
        SymVar v;
        v.n = n;
        v.ids = pool.block(n * (n + 1) / 2);
        return v;
    }

    std::size_t tri_index(std::size_t i, std::size_t j) const {
        if (i > j) std::swap(i, j);
        return i * n - i * (i + 1) / 2 + j;
    }

    // Basis matrix for the k-th scalar: E_ii, or E_ij + E_ji off-diagonal.
    Mat basis(std::size_t k) const {
        Mat b(n, n);
        std::size_t idx = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j, ++idx)
                if (idx == k) {
                    b(i, j) = 1.0;
                    b(j, i) = 1.0;
                    return b;
                }
        throw InvalidInput("SymVar: basis index out of range");
    }

    Mat value(std::span<const double> x) const {
        Mat m(n, n);
        std::size_t idx = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j, ++idx) {
                const double v = x[static_cast<std::size_t>(ids[idx])];
                m(i, j) = v;
                m(j, i) = v;
            }
        return m;
    }

    void store(std::vector<double>& x, const Mat& m) const {
        std::size_t idx = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j, ++idx)
                x[static_cast<std::size_t>(ids[idx])] = 0.5 * (m(i, j) + m(j, i));
    }
};

// Rectangular r x c matrix variable, row-major scalars.
struct RectVar {
    std::size_t r = 0, c = 0;
    std::vector<int> ids;

    static RectVar make(VarPool& pool, std::size_t r, std::size_t c) {
        RectVar v;
        v.r = r;
        v.c = c;
        v.ids = pool.block(r * c);
        return v;
    }

    Mat basis(std::size_t k) const {
        Mat b(r, c);
        b(k / c, k % c) = 1.0;
        return b;
    }

    Mat value(std::span<const double> x) const {
        Mat m(r, c);
        for (std::size_t k = 0; k < ids.size(); ++k)
            m(k / c, k % c) = x[static_cast<std::size_t>(ids[k])];
        return m;
    }

    void store(std::vector<double>& x, const Mat& m) const {
        for (std::size_t k = 0; k < ids.size(); ++k)
            x[static_cast<std::size_t>(ids[k])] = m(k / c, k % c);
    }
};

// ---------------------------------------------------------------------------
// Affine LMI: M(x) = C0 + sum_v x_v * B_v, with every B_v symmetric so the
// assembled matrix is symmetric for any assignment. Feasible means M(x) < 0.
// ---------------------------------------------------------------------------

class AffineLmi {
  public:
    explicit AffineLmi(std::size_t dim) : dim_(dim), constant_(dim, dim) {
        if (dim < 1 || dim > Mat::kCap)
            throw InvalidInput("AffineLmi: dimension must be in [1, 8]");
    }

    std::size_t dim() const { return dim_; }

    void add_constant(const Mat& block) {
        require_block(block);
        constant_ += block;
    }

    void add_coeff(int var, const Mat& block) {
        require_block(block);
        auto it = coeff_.find(var);
        if (it == coeff_.end())
            coeff_.emplace(var, block);
        else
            it->second += block;
    }

    // Selector placing a sub-block's rows at `offset` within `dim` rows.
    static Mat embed_rows(std::size_t dim, std::size_t sub, std::size_t offset) {
        Mat e(dim, sub);
        for (std::size_t i = 0; i < sub; ++i) e(offset + i, i) = 1.0;
        return e;
    }

    // Adds M*X*N + (M*X*N)' for a symmetric matrix variable X.
    void add_sym_pair(const SymVar& X, const Mat& M, const Mat& N) {
        for (std::size_t k = 0; k < X.ids.size(); ++k) {
            const Mat t = M * X.basis(k) * N;
            add_coeff(X.ids[k], t + t.transposed());
        }
    }

    // Adds M*V*N + (M*V*N)' for a rectangular matrix variable V.
    void add_rect_pair(const RectVar& V, const Mat& M, const Mat& N) {
        for (std::size_t k = 0; k < V.ids.size(); ++k) {
            const Mat t = M * V.basis(k) * N;
            add_coeff(V.ids[k], t + t.transposed());
        }
    }

    // Adds `scale * x_var * block` where block is already symmetric.
    void add_scalar_term(int var, const Mat& block, double scale = 1.0) {
        add_coeff(var, block * scale);
    }

    Mat assemble(std::span<const double> x) const {
        Mat m = constant_;
        for (const auto& [var, block] : coeff_) {
            const auto idx = static_cast<std::size_t>(var);
            if (var < 0 || idx >= x.size() || !std::isfinite(x[idx]))
                throw IncompleteAssignment("AffineLmi: unassigned decision variable");
            m += block * x[idx];
        }
        return m;
    }

    // Largest eigenvalue of M(x); negative iff the LMI holds strictly.
    double margin(std::span<const double> x) const {
        return sym_eig_extremes(SymMatrix(assemble(x))).max;
    }

    const std::map<int, Mat>& coefficients() const { return coeff_; }

  private:
    void require_block(const Mat& b) const {
        if (b.rows() != dim_ || b.cols() != dim_)
            throw InvalidInput("AffineLmi: block dimension mismatch");
        const double scale = std::max(1e-300, b.max_abs());
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = i + 1; j < dim_; ++j)
                if (std::fabs(b(i, j) - b(j, i)) > 1e-12 * scale)
                    throw InvalidInput("AffineLmi: coefficient block not symmetric");
    }

    std::size_t dim_;
    Mat constant_;
    std::map<int, Mat> coeff_;
};

} // namespace pvfc
