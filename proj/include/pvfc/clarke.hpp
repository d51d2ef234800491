#pragma once

#include <array>

namespace pvfc {

// Amplitude-invariant Clarke transform: a balanced abc set of amplitude A maps
// to an alpha/beta pair of amplitude A, and p = 1.5*(v_al*i_al + v_be*i_be).
struct AlphaBeta {
    double alpha = 0.0;
    double beta = 0.0;
};

inline AlphaBeta clarke(double a, double b, double c) {
    constexpr double k_beta = 0.57735026918962576;  // 1/sqrt(3)
    return {(2.0 * a - b - c) / 3.0, (b - c) * k_beta};
}

inline AlphaBeta clarke(const std::array<double, 3>& abc) {
    return clarke(abc[0], abc[1], abc[2]);
}

// Inverse for a zero-sequence-free set (a + b + c = 0).
inline std::array<double, 3> inverse_clarke(double alpha, double beta) {
    constexpr double k = 0.86602540378443865;  // sqrt(3)/2
    return {alpha, -0.5 * alpha + k * beta, -0.5 * alpha - k * beta};
}

inline std::array<double, 3> inverse_clarke(const AlphaBeta& ab) {
    return inverse_clarke(ab.alpha, ab.beta);
}

}  // namespace pvfc
