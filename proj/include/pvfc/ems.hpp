#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pvfc/delay_line.hpp"
#include "pvfc/errors.hpp"
#include "pvfc/signal.hpp"

namespace pvfc {

struct Demand {
    double p_star_w = 0.0;
    double q_star_var = 0.0;
};

enum class EmsMode { normal, sag };

struct EmsDecision {
    double p_fc_ref_w = 0.0;
    double p_dump_ref_w = 0.0;
    double q_grid_ref_var = 0.0;
    double p_grid_ref_w = 0.0;
    EmsMode mode = EmsMode::normal;
};

struct EmsLimits {
    double s_max_va = 220e3;
    double p_fc_rated_w = 100e3;
    // Phase-current amplitude that delivers s_max at the nominal phase peak.
    double i_rated_a = 220e3 / (1.5 * (260.0 * std::numbers::sqrt2 / std::numbers::sqrt3));
};

// Knobs of the ride-through support rule: reactive injection grows with sag
// depth at gain k_q, and exported real power is kept under the pre-sag PV
// production so the dc link cannot discharge while the fuel cell is off.
struct SagSupportTuning {
    double k_q = 1.7;
    double pv_headroom = 0.95;
};

struct GridPowerRefs {
    double p_w = 0.0;
    double q_var = 0.0;
};

// Ride-through power split. The apparent-power ceiling shrinks with the
// weakest phase so rated current is never exceeded, reactive support scales
// with sag depth, and the remaining circle budget goes to real power.
inline GridPowerRefs sag_power_refs(const SagStatus& sag, const EmsLimits& lim,
                                    double pre_sag_p_grid_w, double k_q) {
    if (!sag.active) throw InvalidInput("sag power references require an active sag");
    const double v_retained =
        *std::min_element(sag.amplitude_v.begin(), sag.amplitude_v.end());
    const double s_dyn = std::max(0.0, 1.5 * v_retained * lim.i_rated_a);
    double q = k_q * (1.0 - sag.min_fraction) * s_dyn;
    q = std::clamp(q, 0.0, s_dyn);
    const double p_budget = std::sqrt(std::max(0.0, s_dyn * s_dyn - q * q));
    const double p = std::clamp(pre_sag_p_grid_w, 0.0, p_budget);
    return {p, q};
}

// One supervisory decision. Normal mode: clamp the real demand to what PV
// plus the rated fuel cell can deliver, trim reactive power to the apparent
// limit (real power has priority), then route the PV surplus to the dump load
// or the deficit to the fuel cell. Sag mode: fuel cell commanded off, grid
// references from the ride-through rule capped by pre-sag PV production; the
// stack output decays through its own dynamics, so whatever it still delivers
// goes to the dump load — at low irradiance there is not enough PV headroom
// to curtail the tail away, and unchecked it would charge the dc link.
inline EmsDecision ems_step(const Demand& demand, double p_pv_w, const SagStatus& sag,
                            const EmsLimits& lim, double pre_sag_p_grid_w = 0.0,
                            double pre_sag_p_pv_w = 0.0, const SagSupportTuning& tune = {},
                            double p_fc_w = 0.0) {
    if (p_pv_w < 0.0) throw InvalidInput("ems_step: pv power must be non-negative");
    EmsDecision out;
    if (sag.active) {
        out.mode = EmsMode::sag;
        const auto refs = sag_power_refs(sag, lim, pre_sag_p_grid_w, tune.k_q);
        out.q_grid_ref_var = refs.q_var;
        out.p_grid_ref_w = std::min(refs.p_w, tune.pv_headroom * std::max(0.0, pre_sag_p_pv_w));
        out.p_dump_ref_w = std::max(0.0, p_fc_w);
        return out;
    }

    const double p_clamped = std::clamp(demand.p_star_w, 0.0, p_pv_w + lim.p_fc_rated_w);
    const double s = std::hypot(p_clamped, demand.q_star_var);
    double q = demand.q_star_var;
    if (s > lim.s_max_va) {
        const double head = std::sqrt(
            std::max(0.0, lim.s_max_va * lim.s_max_va - p_clamped * p_clamped));
        q = std::copysign(head, demand.q_star_var);
    }
    if (p_pv_w >= p_clamped) {
        out.p_dump_ref_w = p_pv_w - p_clamped;
    } else {
        out.p_fc_ref_w = std::min(p_clamped - p_pv_w, lim.p_fc_rated_w);
    }
    out.p_grid_ref_w = p_clamped;
    out.q_grid_ref_var = q;
    return out;
}

// Stateful wrapper: remembers pre-sag operating levels through a short
// history so the ride-through references use clean measurements from before
// the sag reached the detector (detection lags up to one cycle).
class EnergyManager {
  public:
    explicit EnergyManager(const EmsLimits& lim = {}, const SagSupportTuning& tune = {},
                           std::size_t history_steps = 33)
        : lim_(lim), tune_(tune), p_grid_hist_(history_steps), p_pv_hist_(history_steps) {}

    EmsDecision step(const Demand& demand, double p_pv_w, double p_grid_w,
                     const SagStatus& sag, double p_fc_w = 0.0) {
        const double p_grid_old = p_grid_hist_.push(p_grid_w);
        const double p_pv_old = p_pv_hist_.push(p_pv_w);
        if (sag.active && !was_active_) {
            latched_p_grid_w_ = p_grid_old;
            latched_p_pv_w_ = p_pv_old;
        }
        was_active_ = sag.active;
        return ems_step(demand, p_pv_w, sag, lim_, latched_p_grid_w_, latched_p_pv_w_, tune_,
                        p_fc_w);
    }

    const EmsLimits& limits() const { return lim_; }
    double latched_p_grid_w() const { return latched_p_grid_w_; }
    double latched_p_pv_w() const { return latched_p_pv_w_; }

  private:
    EmsLimits lim_;
    SagSupportTuning tune_;
    DelayLine p_grid_hist_;
    DelayLine p_pv_hist_;
    bool was_active_ = false;
    double latched_p_grid_w_ = 0.0;
    double latched_p_pv_w_ = 0.0;
};

}  // namespace pvfc
