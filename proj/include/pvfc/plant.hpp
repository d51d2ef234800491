#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "pvfc/clarke.hpp"
#include "pvfc/errors.hpp"
#include "pvfc/fuel_cell.hpp"
#include "pvfc/grid.hpp"
#include "pvfc/integrate.hpp"
#include "pvfc/pv_array.hpp"

namespace pvfc {

// Lumped electrical constants: 1 mOhm / 0.25 mH converter filter in series
// with two 0.001 pu / 0.03 pu transformer windings on the 220 kVA, 260 V
// base, referred to the LV side.
struct ElectricalParams {
    static constexpr double z_base_ohm = 260.0 * 260.0 / 220e3;
    static constexpr double omega_base = 2.0 * std::numbers::pi * 60.0;

    double c_dc_f = 12e-3;
    double r_ohm = 1.0e-3 + 0.002 * z_base_ohm;
    double l_h = 0.25e-3 + 0.06 * z_base_ohm / omega_base;
    GridParams grid;
    double u_r = 1.0;  // uncertainty scale factors, each within [0.7, 1.3]
    double u_l = 1.0;
    double u_c = 1.0;
};

inline void validate_electrical(const ElectricalParams& e) {
    if (!(e.c_dc_f > 0.0) || !(e.r_ohm > 0.0) || !(e.l_h > 0.0))
        throw InvalidInput("electrical parameters must be positive");
    for (double u : {e.u_r, e.u_l, e.u_c})
        if (!(u >= 0.7) || !(u <= 1.3))
            throw InvalidInput("uncertainty factors must lie in [0.7, 1.3]");
}

struct PlantParams {
    PvArrayParams pv;
    FcGenParams fc;
    ElectricalParams elec;
    std::vector<SagSpec> sags;
    double pv_terminal_tau_s = 0.5e-3;  // boost input capacitor smoothing
    double dc_collapse_v = 50.0;
};

struct PlantState {
    double v_dc_v = 800.0;
    double i_alpha_a = 0.0;
    double i_beta_a = 0.0;
    double v_pv_v = 315.0;  // array terminal voltage
    double pv_duty = 0.0;   // last applied boost duty
    FcState fc;
    double time_s = 0.0;
};

struct PlantInputs {
    double u_t_alpha_v = 0.0;  // VSC terminal voltage command
    double u_t_beta_v = 0.0;
    double pv_duty = 0.0;
    std::array<double, kFcStacks> fc_ref_w{0.0, 0.0};
    double p_dump_w = 0.0;
    double irradiance_w_m2 = 1000.0;
    double temperature_c = 25.0;
    double zeta_dc_a = 0.0;  // optional disturbance channels
    double zeta_alpha = 0.0;
    double zeta_beta = 0.0;
};

// Linear-modulation limit of the VSC: |u_t| <= v_dc / 2.
inline AlphaBeta modulation_clamp(double u_alpha, double u_beta, double v_dc) {
    const double limit = std::max(v_dc, 0.0) / 2.0;
    const double mag = std::hypot(u_alpha, u_beta);
    if (mag <= limit) return {u_alpha, u_beta};
    const double s = limit / mag;
    return {u_alpha * s, u_beta * s};
}

struct PowerFlows {
    double p_pv_w = 0.0;
    double p_fc_w = 0.0;
    double p_dump_w = 0.0;
    double p_vsc_w = 0.0;   // into the RL interface and dump bus
    double p_grid_w = 0.0;  // delivered at the grid terminals
    double q_grid_var = 0.0;
    double i_src_a = 0.0;  // PV + FC injection into the dc link
    double i_dc_a = 0.0;   // VSC + dump draw from the dc link
};

namespace detail {

inline double pv_power_into_link(double v_pv, double irradiance, double temperature,
                                 const PvArrayParams& pv) {
    // The boost stage's input diode blocks reverse current above Voc.
    const double i = pv_current(v_pv, irradiance, temperature, pv);
    return std::max(0.0, v_pv * i);
}

}  // namespace detail

// Measurements at the state's instant, with the staircase injections the
// integrator will hold over the following step.
inline PowerFlows plant_flows(const PlantState& s, const PlantInputs& in,
                              const PlantParams& par) {
    PowerFlows f;
    f.p_pv_w = detail::pv_power_into_link(s.v_pv_v, in.irradiance_w_m2, in.temperature_c, par.pv);
    f.p_fc_w = s.fc.total_w();
    f.p_dump_w = in.p_dump_w;
    const auto u = modulation_clamp(in.u_t_alpha_v, in.u_t_beta_v, s.v_dc_v);
    f.p_vsc_w = 1.5 * (u.alpha * s.i_alpha_a + u.beta * s.i_beta_a) + in.p_dump_w;
    const auto vg = clarke(grid_voltages(s.time_s, par.elec.grid, par.sags));
    f.p_grid_w = 1.5 * (vg.alpha * s.i_alpha_a + vg.beta * s.i_beta_a);
    f.q_grid_var = 1.5 * (vg.beta * s.i_alpha_a - vg.alpha * s.i_beta_a);
    const double v_eff = std::max(s.v_dc_v, 1.0);
    f.i_src_a = (f.p_pv_w + f.p_fc_w) / v_eff;
    f.i_dc_a = f.p_vsc_w / v_eff;
    return f;
}

// One averaged-model step: RK4 over {v_dc, i_alpha, i_beta} with the VSC
// command held, PV/FC injections staircase-constant, and the grid voltage
// evaluated continuously inside the stages.
inline PlantState plant_step(const PlantState& s, const PlantInputs& in, double dt,
                             const PlantParams& par) {
    if (!(dt > 0.0)) throw InvalidInput("plant step requires dt > 0");
    validate_electrical(par.elec);
    if (in.p_dump_w < 0.0) throw InvalidInput("dump power must be non-negative");
    for (double ref : in.fc_ref_w)
        if (ref < 0.0 || ref > par.fc.rated_per_stack_w)
            throw InvalidInput("fc stack reference outside [0, rated]");

    const double r = par.elec.r_ohm * par.elec.u_r;
    const double l = par.elec.l_h * par.elec.u_l;
    const double c = par.elec.c_dc_f * par.elec.u_c;

    const double duty = std::clamp(in.pv_duty, 0.0, 0.99);
    const double p_pv =
        detail::pv_power_into_link(s.v_pv_v, in.irradiance_w_m2, in.temperature_c, par.pv);
    const double p_in = p_pv + s.fc.total_w();
    const auto u = modulation_clamp(in.u_t_alpha_v, in.u_t_beta_v, s.v_dc_v);

    const auto deriv = [&](double t, const std::array<double, 3>& y) -> std::array<double, 3> {
        const double v_eff = std::max(y[0], 1.0);  // keeps stages finite, far below collapse
        const auto vg = clarke(grid_voltages(t, par.elec.grid, par.sags));
        const double p_t = 1.5 * (u.alpha * y[1] + u.beta * y[2]);
        return {((p_in - p_t - in.p_dump_w) / v_eff + in.zeta_dc_a) / c,
                (-r * y[1] + u.alpha - vg.alpha) / l + in.zeta_alpha,
                (-r * y[2] + u.beta - vg.beta) / l + in.zeta_beta};
    };

    const auto y = rk4_step<3>(deriv, {s.v_dc_v, s.i_alpha_a, s.i_beta_a}, s.time_s, dt);

    PlantState next;
    next.v_dc_v = y[0];
    next.i_alpha_a = y[1];
    next.i_beta_a = y[2];
    const double v_pv_target = (1.0 - duty) * s.v_dc_v;
    next.v_pv_v = v_pv_target + (s.v_pv_v - v_pv_target) * std::exp(-dt / par.pv_terminal_tau_s);
    next.pv_duty = duty;
    for (int k = 0; k < kFcStacks; ++k)
        next.fc.stack_w[k] = fc_stack_step(in.fc_ref_w[k], s.fc.stack_w[k], dt, par.fc);
    next.time_s = s.time_s + dt;

    if (next.v_dc_v <= par.dc_collapse_v)
        throw DcCollapse("dc link voltage collapsed", next.time_s);
    return next;
}

}  // namespace pvfc
