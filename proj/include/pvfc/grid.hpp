#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "pvfc/errors.hpp"

namespace pvfc {

// Ideal 60 Hz source behind the lumped RL interface. Amplitude is the phase
// peak of the 260 V line-to-line LV bus.
struct GridParams {
    double f_hz = 60.0;
    double v_phase_peak = 260.0 * std::numbers::sqrt2 / std::numbers::sqrt3;

    double omega() const { return 2.0 * std::numbers::pi * f_hz; }
};

// A voltage sag: each phase keeps `retained` of its amplitude on [start, end).
struct SagSpec {
    double start_s = 0.0;
    double end_s = 0.0;
    std::array<double, 3> retained{1.0, 1.0, 1.0};
};

inline void validate_sags(std::span<const SagSpec> sags) {
    for (const auto& s : sags) {
        if (!(s.start_s < s.end_s)) throw ConfigError("sag must have start < end");
        for (double r : s.retained)
            if (!(r > 0.0) || r > 1.0) throw ConfigError("sag retained fraction must be in (0, 1]");
    }
    std::vector<const SagSpec*> order;
    for (const auto& s : sags) order.push_back(&s);
    std::sort(order.begin(), order.end(),
              [](const SagSpec* a, const SagSpec* b) { return a->start_s < b->start_s; });
    for (std::size_t k = 1; k < order.size(); ++k)
        if (order[k]->start_s < order[k - 1]->end_s) throw ConfigError("sags overlap");
}

// Per-phase retained amplitude fractions at time t (1 outside any sag).
inline std::array<double, 3> sag_retained(double t, std::span<const SagSpec> sags) {
    for (const auto& s : sags)
        if (t >= s.start_s && t < s.end_s) return s.retained;
    return {1.0, 1.0, 1.0};
}

inline std::array<double, 3> grid_voltages(double t, const GridParams& g,
                                           std::span<const SagSpec> sags) {
    constexpr double third = 2.0 * std::numbers::pi / 3.0;
    const double th = g.omega() * t;
    const auto r = sag_retained(t, sags);
    return {r[0] * g.v_phase_peak * std::cos(th),
            r[1] * g.v_phase_peak * std::cos(th - third),
            r[2] * g.v_phase_peak * std::cos(th - 2.0 * third)};
}

}  // namespace pvfc
