#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "pvfc/errors.hpp"

namespace pvfc {

inline constexpr int kFcStacks = 2;

// Dispatchable fuel-cell generation: two identical stacks, each a first-order
// power stage with a slew limit standing in for stack/reformer dynamics.
struct FcGenParams {
    int stacks = kFcStacks;
    double rated_per_stack_w = 50e3;
    double tau_s = 0.1;
    double ramp_w_per_s = 500e3;
    double min_power_w = 0.0;

    double rated_total_w() const { return stacks * rated_per_stack_w; }
};

struct FcState {
    std::array<double, kFcStacks> stack_w{0.0, 0.0};

    double total_w() const { return std::accumulate(stack_w.begin(), stack_w.end(), 0.0); }
};

// One stack: exact exponential relaxation toward the clamped reference, then
// the slew limit, then the output clamp.
inline double fc_stack_step(double p_ref_w, double p_prev_w, double dt,
                            const FcGenParams& fc) {
    if (dt <= 0.0) throw InvalidInput("fc step requires dt > 0");
    const double target = std::clamp(p_ref_w, fc.min_power_w, fc.rated_per_stack_w);
    double p = target + (p_prev_w - target) * std::exp(-dt / fc.tau_s);
    const double slew = fc.ramp_w_per_s * dt;
    p = std::clamp(p, p_prev_w - slew, p_prev_w + slew);
    return std::clamp(p, 0.0, fc.rated_per_stack_w);
}

// Aggregate step: the total reference is shared equally across stacks.
inline FcState fc_step(double p_ref_total_w, const FcState& state, double dt,
                       const FcGenParams& fc) {
    if (fc.stacks != kFcStacks) throw InvalidInput("fc generator models exactly two stacks");
    if (p_ref_total_w < 0.0 || p_ref_total_w > fc.rated_total_w())
        throw InvalidInput("fc power reference outside [0, rated]");
    FcState next;
    const double per_stack = p_ref_total_w / fc.stacks;
    for (int k = 0; k < kFcStacks; ++k)
        next.stack_w[k] = fc_stack_step(per_stack, state.stack_w[k], dt, fc);
    return next;
}

}  // namespace pvfc
