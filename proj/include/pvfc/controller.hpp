#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "pvfc/control.hpp"
#include "pvfc/ems.hpp"
#include "pvfc/plant.hpp"
#include "pvfc/signal.hpp"

namespace pvfc {

// Timing, setpoints and local tuning for the plant controller. Loop gains
// live in SystemGains; everything here is structural.
struct ControllerConfig {
    double dt = 1.0 / 60000.0;          // control/simulation step
    std::size_t ems_period_steps = 60;   // supervisory decisions at 1 kHz
    std::size_t mppt_period_steps = 300; // perturb-and-observe at 200 Hz
    double mppt_duty_step = 2.5 / 800.0; // ~2.5 V terminal perturbation
    double pv_duty_min = 0.05;
    double pv_duty_max = 0.95;
    // Start the boost stage at a terminal voltage below the array's
    // open-circuit knee at any credible irradiance, so the first perturb
    // already sees nonzero power and the hill climb has a gradient to
    // follow. (Starting above the knee reads zero power in both perturb
    // directions and the climb never leaves the flat region.)
    double pv_duty_start = 1.0 - 260.0 / 800.0;
    double curtail_gain = 1.5;           // duty per ampere-second of excess injection
    // How far below the entry duty curtailment may go: one hill-climb dither
    // step. The entry duty sits at the maximum-power point, so any further
    // down the boost gain reverses sign and the balance loop would latch.
    double curtail_backoff = 0.005;
    double v_dc_ref_v = 800.0;
    double eps_v = 1.0;                  // V, degenerate-voltage guard
    double eps_d = 1.0;                  // V^2, degenerate-denominator guard
    std::size_t sag_window = 1000;       // one fundamental cycle
    double sag_detect_pu = 0.90;
    double sag_clear_pu = 0.95;
};

inline void validate_controller_config(const ControllerConfig& c) {
    if (!(c.dt > 0.0)) throw ConfigError("controller: dt must be positive");
    if (c.ems_period_steps < 1 || c.mppt_period_steps < 1)
        throw ConfigError("controller: loop periods must be at least one step");
    if (!(c.mppt_duty_step > 0.0)) throw ConfigError("controller: mppt step must be positive");
    if (!(c.pv_duty_min >= 0.0 && c.pv_duty_max <= 0.99 && c.pv_duty_min < c.pv_duty_max))
        throw ConfigError("controller: invalid pv duty range");
    if (!(c.curtail_gain > 0.0)) throw ConfigError("controller: curtail gain must be positive");
    if (!(c.v_dc_ref_v > 0.0)) throw ConfigError("controller: dc reference must be positive");
}

// Whole-plant digital controller: sag detection, supervisory dispatch,
// dc-link regulation with a disturbance observer, stationary-frame current
// references with a quarter-period voltage delay for ride-through, a
// repetitive current regulator per axis, perturb-and-observe tracking for
// the PV boost stage and a power loop for the fuel-cell converter. One call
// per simulation step; returns the actuator commands to hold over the step.
class PlantController {
  public:
    PlantController(const SystemGains& gains, const PlantParams& plant,
                    const EmsLimits& limits = {}, const SagSupportTuning& tuning = {},
                    const ControllerConfig& config = {})
        : gains_(gains),
          plant_(plant),
          limits_(limits),
          config_(config),
          observer_(gains.k_obs, gains.l_obs, config.dt),
          detector_(config.sag_window, plant.elec.grid.v_phase_peak, config.sag_detect_pu,
                    config.sag_clear_pu),
          manager_(limits, tuning),
          axis_alpha_(samples_for_delay(1.0 / plant.elec.grid.f_hz, config.dt)),
          axis_beta_(samples_for_delay(1.0 / plant.elec.grid.f_hz, config.dt)),
          v_alpha_delay_(samples_for_delay(0.25 / plant.elec.grid.f_hz, config.dt)),
          v_beta_delay_(samples_for_delay(0.25 / plant.elec.grid.f_hz, config.dt)),
          pv_duty_(config.pv_duty_start) {
        validate_gains(gains);
        validate_controller_config(config);
        observer_.reset(config.v_dc_ref_v, 0.0);
        last_inputs_.pv_duty = pv_duty_;
        curtail_entry_duty_ = pv_duty_;
    }

    // Compute the commands to apply over [t, t + dt) from the measured
    // state. Measurements of converter flows use the commands currently in
    // force (the ones this controller issued last step).
    PlantInputs step(const PlantState& s, const Demand& demand, double irradiance_w_m2,
                     double temperature_c = 25.0) {
        last_inputs_.irradiance_w_m2 = irradiance_w_m2;
        last_inputs_.temperature_c = temperature_c;
        const PowerFlows flows = plant_flows(s, last_inputs_, plant_);
        const auto v_abc = grid_voltages(s.time_s, plant_.elec.grid, plant_.sags);
        const AlphaBeta v_ab = clarke(v_abc);
        const AlphaBeta v_delayed{v_alpha_delay_.push(v_ab.alpha),
                                  v_beta_delay_.push(v_ab.beta)};
        const SagStatus sag = detector_.update(v_abc, s.time_s);

        // Supervisory layer at its own cadence; mode changes take effect
        // only when the decision refreshes, so every ride-through handover
        // happens atomically on a supervisory boundary.
        if (step_count_ % config_.ems_period_steps == 0) {
            const EmsDecision next = manager_.step(demand, flows.p_pv_w, flows.p_grid_w, sag,
                                                   flows.p_fc_w);
            if (next.mode == EmsMode::sag && decision_.mode == EmsMode::normal) {
                curtail_entry_duty_ = pv_duty_;
            } else if (next.mode == EmsMode::normal && decision_.mode == EmsMode::sag) {
                // Snap straight back to the pre-sag operating point; the
                // hill climb then resumes from fresh samples.
                pv_duty_ = std::clamp(curtail_entry_duty_, config_.pv_duty_min,
                                      config_.pv_duty_max);
                mppt_primed_ = false;
            }
            if (next.mode != decision_.mode) {
                // The stored waveform corrections belong to the old operating
                // point; replaying them across the handover superimposes the
                // transition-cycle error on the new references one period
                // later. Start the learning afresh and let the proportional
                // path carry tracking while the pattern rebuilds.
                const auto quiet =
                    static_cast<std::size_t>(2 * config_.ems_period_steps);
                axis_alpha_.reset(quiet);
                axis_beta_.reset(quiet);
                // The disturbance estimate is stale in the same way: it has
                // absorbed the fuel-cell/dump flows of the old mode, and fed
                // into the new mode's reference it misdirects the link loop
                // until it re-converges. Either side of the handover the
                // supervisor's bookkeeping leaves roughly zero unmodeled
                // flow, so a clean restart is close to the truth.
                observer_.reset(s.v_dc_v);
            }
            decision_ = next;
        }

        // dc-link loop: command first, then propagate the observer with the
        // command that is actually applied.
        const double u = dc_control(s.v_dc_v, config_.v_dc_ref_v, observer_.xi_hat(),
                                    gains_.k_dc);
        observer_.step(s.v_dc_v, u);

        // Current references for the requested operating mode.
        std::optional<AlphaBeta> refs;
        if (decision_.mode == EmsMode::sag) {
            refs = current_refs_sag(v_ab, v_delayed, decision_.p_grid_ref_w,
                                    decision_.q_grid_ref_var, config_.eps_d);
        } else {
            const double p_ref = power_ref_normal(flows.p_pv_w, s.v_dc_v, u,
                                                  plant_.elec.c_dc_f);
            refs = current_refs_normal(v_ab, p_ref, decision_.q_grid_ref_var, config_.eps_v);
        }
        if (refs) i_ref_ = *refs; // otherwise hold the previous reference
        const double i_mag = std::hypot(i_ref_.alpha, i_ref_.beta);
        if (i_mag > limits_.i_rated_a)
            i_ref_ = AlphaBeta{i_ref_.alpha * limits_.i_rated_a / i_mag,
                               i_ref_.beta * limits_.i_rated_a / i_mag};

        // Repetitive current regulator, both axes sharing one vector clamp.
        const double e_alpha = i_ref_.alpha - s.i_alpha_a;
        const double e_beta = i_ref_.beta - s.i_beta_a;
        double u_alpha = axis_alpha_.output(e_alpha, s.i_alpha_a, gains_.k1, gains_.k2);
        double u_beta = axis_beta_.output(e_beta, s.i_beta_a, gains_.k1, gains_.k2);
        const auto [uc_alpha, uc_beta] = modulation_clamp(u_alpha, u_beta, s.v_dc_v);
        const bool clamped = (uc_alpha != u_alpha) || (uc_beta != u_beta);
        axis_alpha_.advance(e_alpha, config_.dt, gains_.omega_c, clamped);
        axis_beta_.advance(e_beta, config_.dt, gains_.omega_c, clamped);

        // PV boost stage: hill-climb in normal mode, link-balancing
        // curtailment loop during sags (conditional integration at clamps).
        const double v_eff = std::max(s.v_dc_v, 1.0);
        if (decision_.mode == EmsMode::sag) {
            const double i_pv_meas = flows.p_pv_w / v_eff;
            const double i_fc_meas = flows.p_fc_w / v_eff;
            const double i_pv_ref =
                flows.i_dc_a - i_fc_meas - curtailment_ref_sag(u, plant_.elec.c_dc_f);
            const double lo = std::max(config_.pv_duty_min,
                                       curtail_entry_duty_ - config_.curtail_backoff);
            pv_duty_ = std::clamp(
                pv_duty_ + config_.curtail_gain * (i_pv_meas - i_pv_ref) * config_.dt, lo,
                config_.pv_duty_max);
        } else if (step_count_ % config_.mppt_period_steps == 0) {
            if (mppt_primed_) {
                const double delta = mppt_po(flows.p_pv_w, s.v_pv_v, mppt_prev_p_,
                                             mppt_prev_v_, config_.mppt_duty_step);
                pv_duty_ = std::clamp(pv_duty_ + delta, config_.pv_duty_min,
                                      config_.pv_duty_max);
            }
            mppt_prev_p_ = flows.p_pv_w;
            mppt_prev_v_ = s.v_pv_v;
            mppt_primed_ = true;
        }

        // Fuel-cell power loop: one aggregate duty, split evenly per stack.
        const double fc_duty = fc_power_control(decision_.p_fc_ref_w, flows.p_fc_w,
                                                plant_.fc.rated_per_stack_w);
        const double per_stack =
            std::min(fc_duty / 0.95 * plant_.fc.rated_per_stack_w, plant_.fc.rated_per_stack_w);

        PlantInputs out;
        out.u_t_alpha_v = uc_alpha;
        out.u_t_beta_v = uc_beta;
        out.pv_duty = pv_duty_;
        out.fc_ref_w = {per_stack, per_stack};
        out.p_dump_w = decision_.p_dump_ref_w;
        out.irradiance_w_m2 = irradiance_w_m2;
        out.temperature_c = temperature_c;
        last_inputs_ = out;
        ++step_count_;
        return out;
    }

    EmsMode mode() const { return decision_.mode; }
    const EmsDecision& decision() const { return decision_; }
    const DcObserver& observer() const { return observer_; }
    const AlphaBeta& current_reference() const { return i_ref_; }
    double pv_duty() const { return pv_duty_; }

  private:
    SystemGains gains_;
    PlantParams plant_;
    EmsLimits limits_;
    ControllerConfig config_;
    DcObserver observer_;
    SagDetector detector_;
    EnergyManager manager_;
    RepetitiveAxis axis_alpha_;
    RepetitiveAxis axis_beta_;
    DelayLine v_alpha_delay_;
    DelayLine v_beta_delay_;
    EmsDecision decision_{};
    PlantInputs last_inputs_{};
    AlphaBeta i_ref_{0.0, 0.0};
    double pv_duty_;
    double curtail_entry_duty_ = 0.0;  // set from the start duty, tracked thereafter
    bool mppt_primed_ = false;
    double mppt_prev_p_ = 0.0;
    double mppt_prev_v_ = 0.0;
    std::size_t step_count_ = 0;
};

} // namespace pvfc
