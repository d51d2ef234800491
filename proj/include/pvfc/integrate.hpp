#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include "pvfc/errors.hpp"

namespace pvfc {

namespace detail {
template <std::size_t N>
inline void require_finite(const std::array<double, N>& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw IntegrationFault(what);
}
} // namespace detail

// One classic fourth-order Runge-Kutta step. f(t, x) -> dx/dt.
// Throws IntegrationFault if any stage produces a non-finite value.
template <std::size_t N, class Deriv>
std::array<double, N> rk4_step(Deriv&& f, const std::array<double, N>& x,
                               double t, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt) || !std::isfinite(t))
        throw InvalidInput("rk4_step: bad t/dt");
    detail::require_finite<N>(x, "rk4_step: non-finite state");

    const std::array<double, N> k1 = f(t, x);
    detail::require_finite<N>(k1, "rk4_step: non-finite derivative (k1)");

    std::array<double, N> xs;
    for (std::size_t i = 0; i < N; ++i) xs[i] = x[i] + 0.5 * dt * k1[i];
    const std::array<double, N> k2 = f(t + 0.5 * dt, xs);
    detail::require_finite<N>(k2, "rk4_step: non-finite derivative (k2)");

    for (std::size_t i = 0; i < N; ++i) xs[i] = x[i] + 0.5 * dt * k2[i];
    const std::array<double, N> k3 = f(t + 0.5 * dt, xs);
    detail::require_finite<N>(k3, "rk4_step: non-finite derivative (k3)");

    for (std::size_t i = 0; i < N; ++i) xs[i] = x[i] + dt * k3[i];
    const std::array<double, N> k4 = f(t + dt, xs);
    detail::require_finite<N>(k4, "rk4_step: non-finite derivative (k4)");

    std::array<double, N> out;
    for (std::size_t i = 0; i < N; ++i)
        out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    detail::require_finite<N>(out, "rk4_step: non-finite state after step");
    return out;
}

// Scalar convenience overload; f(t, x) -> dx/dt as plain doubles.
template <class Deriv>
double rk4_step(Deriv&& f, double x, double t, double dt) {
    auto wrap = [&f](double tt, const std::array<double, 1>& xx) {
        return std::array<double, 1>{f(tt, xx[0])};
    };
    return rk4_step<1>(wrap, std::array<double, 1>{x}, t, dt)[0];
}

} // namespace pvfc
