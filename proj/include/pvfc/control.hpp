#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "pvfc/clarke.hpp"
#include "pvfc/delay_line.hpp"
#include "pvfc/errors.hpp"
#include "pvfc/matrix.hpp"

namespace pvfc {

// Full gain set for the cascaded regulators: the dc-link loop (proportional
// gain plus disturbance observer) and the inner current loop (state feedback
// plus repetitive action). Defaults reproduce the stock design; synthesis or
// a gains file may override any entry.
struct SystemGains {
    // dc-link loop
    double k_dc = 100.0;                          // 1/s
    SymMatrix k_obs{{{1.0, 0.0}, {0.0, 1.0}}};    // observer certificate weight
    Mat l_obs = Mat::zeros(2, 1);                 // observer weight (gain = K^-1 L)
    double alpha = 50.0;                          // guaranteed observer decay, 1/s
    double epsilon = 0.0;                         // observer regularization record
    // current loop
    double k1 = 0.0;                              // state-feedback term, V/A
    double k2 = 0.0;                              // error/repetitive term, V/A
    double omega_c = 12000.0;                     // repetitive filter cutoff, rad/s
    double lambda = 500.0;                        // integral-action rate, 1/s
    double tau_i = 1.0 / 500.0;                   // integral time constant, s
    double gamma = 0.0;                           // feedback certificate record
};

// Derive the dependent entries from the integral-action rate: the dc loop
// runs five times slower than the current-loop integral action.
inline void derive_gain_defaults(SystemGains& g) {
    if (!(g.lambda > 0.0)) throw InvalidInput("derive_gain_defaults: lambda must be positive");
    g.tau_i = 1.0 / g.lambda;
    g.k_dc = g.lambda / 5.0;
}

inline void validate_gains(const SystemGains& g) {
    if (!(g.k_dc > 0.0)) throw ConfigError("gains: k_dc must be positive");
    if (!(g.omega_c > 0.0)) throw ConfigError("gains: omega_c must be positive");
    if (!(g.lambda > 0.0)) throw ConfigError("gains: lambda must be positive");
    if (!(g.tau_i > 0.0)) throw ConfigError("gains: tau_i must be positive");
    if (!(g.k2 > g.k1)) throw ConfigError("gains: k2 must exceed k1 for a stable current loop");
}

// dc-link voltage regulator: u has units of V/s (a commanded slew of the
// link voltage) and is turned into a power or current reference downstream.
inline double dc_control(double v_dc, double v_dc_ref, double xi_hat, double k_dc) {
    if (!(k_dc > 0.0)) throw InvalidInput("dc_control: k_dc must be positive");
    return k_dc * (v_dc - v_dc_ref) + xi_hat;
}

// Grid power reference while the grid can absorb everything: export the PV
// production plus the correction that steers v_dc back to its setpoint. The
// observer's disturbance estimate (inside u) absorbs fuel-cell injection,
// dump draw and converter losses, so the export settles at the total net
// production without any explicit bookkeeping here.
inline double power_ref_normal(double p_pv, double v_dc, double u, double c_dc) {
    if (!(v_dc > 0.0)) throw InvalidInput("power_ref_normal: v_dc must be positive");
    if (!(c_dc > 0.0)) throw InvalidInput("power_ref_normal: capacitance must be positive");
    return p_pv + c_dc * v_dc * u;
}

// During a voltage sag the grid export is capped by the ride-through rules,
// so the dc loop actuates the PV side instead: this is the amount by which
// the PV injection current must back off from the measured link balance.
inline double curtailment_ref_sag(double u, double c_dc) {
    if (!(c_dc > 0.0)) throw InvalidInput("curtailment_ref_sag: capacitance must be positive");
    return c_dc * u;
}

// Stationary-frame current references delivering commanded P and Q at the
// measured grid voltage (amplitude-invariant frame: p = 1.5 v.i). Returns
// nothing when the voltage is too small to divide by; the caller holds the
// previous reference in that case.
inline std::optional<AlphaBeta> current_refs_normal(const AlphaBeta& v, double p_ref,
                                                    double q_ref, double eps_v = 1.0) {
    const double d = v.alpha * v.alpha + v.beta * v.beta;
    if (!(d > eps_v * eps_v)) return std::nullopt;
    const double s = 2.0 / (3.0 * d);
    return AlphaBeta{s * (v.alpha * p_ref + v.beta * q_ref),
                     s * (v.beta * p_ref - v.alpha * q_ref)};
}

// Ride-through current references built from the present voltage and its
// quarter-period-delayed copy. Pairing the two keeps the delivered real
// power ripple-free even when the voltage is unbalanced, at the cost of a
// double-frequency oscillation in reactive power; the resulting currents
// stay sinusoidal because the denominator is constant for sinusoidal
// (positive plus negative sequence) voltages.
inline std::optional<AlphaBeta> current_refs_sag(const AlphaBeta& v, const AlphaBeta& v_delayed,
                                                 double p_ref, double q_ref,
                                                 double eps_d = 1.0) {
    const double d = v.beta * v_delayed.alpha - v.alpha * v_delayed.beta;
    if (!(std::fabs(d) > eps_d)) return std::nullopt;
    const double s = 2.0 / (3.0 * d);
    return AlphaBeta{s * (v.beta * q_ref - v_delayed.beta * p_ref),
                     s * (v_delayed.alpha * p_ref - v.alpha * q_ref)};
}

// Observer for the dc-link model dv/dt = -u + xi, d(xi)/dt ~ 0, where xi
// lumps every power-flow term the control law does not command explicitly.
// Discretized with the trapezoidal rule so the estimate stays well behaved
// at any stable gain. The injection gain is K^-1 L from the synthesis
// certificate; a singular K is a configuration defect.
class DcObserver {
  public:
    DcObserver(const SymMatrix& k_weight, const Mat& l_weight, double dt)
        : dt_(dt) {
        if (!(dt > 0.0)) throw InvalidInput("DcObserver: dt must be positive");
        if (k_weight.mat().rows() != 2 || l_weight.rows() != 2 || l_weight.cols() != 1)
            throw InvalidInput("DcObserver: weights must be 2x2 and 2x1");
        const Mat& k = k_weight.mat();
        const double det = k(0, 0) * k(1, 1) - k(0, 1) * k(1, 0);
        if (std::fabs(det) <= 1e-12 * std::max(1.0, k.max_abs() * k.max_abs()))
            throw ConfigError("DcObserver: singular certificate weight");
        lambda1_ = (k(1, 1) * l_weight(0, 0) - k(0, 1) * l_weight(1, 0)) / det;
        lambda2_ = (k(0, 0) * l_weight(1, 0) - k(1, 0) * l_weight(0, 0)) / det;

        // M = A - Lambda C = [[-L1, 1], [-L2, 0]]; cache the trapezoidal
        // update x+ = (I - dt/2 M)^-1 ((I + dt/2 M) x + dt (B u + Lambda y)).
        const double h = 0.5 * dt;
        q00_ = 1.0 - h * lambda1_;
        q01_ = h;
        q10_ = -h * lambda2_;
        q11_ = 1.0;
        const double a00 = 1.0 + h * lambda1_;
        const double a01 = -h;
        const double a10 = h * lambda2_;
        const double a11 = 1.0;
        const double adet = a00 * a11 - a01 * a10;
        if (std::fabs(adet) <= 1e-300)
            throw ConfigError("DcObserver: degenerate discretization");
        p00_ = a11 / adet;
        p01_ = -a01 / adet;
        p10_ = -a10 / adet;
        p11_ = a00 / adet;
    }

    void reset(double v_hat, double xi_hat = 0.0) {
        v_hat_ = v_hat;
        xi_hat_ = xi_hat;
    }

    // Advance one sample with the measurement and the command held over the
    // step. Call after computing u from the current estimates.
    void step(double v_dc_meas, double u) {
        const double r0 =
            q00_ * v_hat_ + q01_ * xi_hat_ + dt_ * (-u + lambda1_ * v_dc_meas);
        const double r1 = q10_ * v_hat_ + q11_ * xi_hat_ + dt_ * lambda2_ * v_dc_meas;
        v_hat_ = p00_ * r0 + p01_ * r1;
        xi_hat_ = p10_ * r0 + p11_ * r1;
    }

    double v_hat() const { return v_hat_; }
    double xi_hat() const { return xi_hat_; }
    double lambda1() const { return lambda1_; }
    double lambda2() const { return lambda2_; }

  private:
    double dt_;
    double lambda1_ = 0.0, lambda2_ = 0.0;
    double q00_ = 0.0, q01_ = 0.0, q10_ = 0.0, q11_ = 0.0;
    double p00_ = 0.0, p01_ = 0.0, p10_ = 0.0, p11_ = 0.0;
    double v_hat_ = 0.0, xi_hat_ = 0.0;
};

// One axis of the repetitive current regulator. The internal model state
// x_rc integrates the error one period ago through a first-order filter,
// which lets the loop null any 60 Hz-periodic tracking error; k1/k2 come
// from the state-feedback synthesis. Forward Euler keeps the delay taps on
// the exact sample grid.
class RepetitiveAxis {
  public:
    RepetitiveAxis(std::size_t period_samples)
        : x_hist_(period_samples), e_hist_(period_samples) {}

    // Control output from the current state and measurements.
    double output(double e, double i_meas, double k1, double k2) const {
        return k1 * i_meas + k2 * (x_rc_ + e);
    }

    // Push this sample into the period delay lines and integrate the
    // internal model unless the actuator saturated (integration freezes to
    // avoid wind-up while clamped; the histories still advance with time).
    // During the post-reset quiet window the histories record zeros: the
    // first samples after a reset hold the one-off transition flash, and
    // replaying it one period later would superimpose a spurious spike on
    // an already-converged current.
    void advance(double e, double dt, double omega_c, bool freeze) {
        if (quiet_ > 0) {
            --quiet_;
            e = 0.0;
        }
        const double x_del = x_hist_.push(x_rc_);
        const double e_del = e_hist_.push(e);
        if (!freeze) x_rc_ += dt * omega_c * (-x_rc_ + x_del + e_del);
    }

    void reset(std::size_t quiet_samples = 0) {
        x_rc_ = 0.0;
        x_hist_.fill(0.0);
        e_hist_.fill(0.0);
        quiet_ = quiet_samples;
    }

    double x_rc() const { return x_rc_; }
    std::size_t period_samples() const { return x_hist_.length(); }

  private:
    double x_rc_ = 0.0;
    std::size_t quiet_ = 0;
    DelayLine x_hist_;
    DelayLine e_hist_;
};

// Single-axis convenience wrapper: compute the output, clamp it to the
// actuator limit, and advance the internal model (frozen while clamped).
inline double repetitive_step(RepetitiveAxis& axis, double e, double i_meas,
                              const SystemGains& g, double dt,
                              double u_limit = std::numeric_limits<double>::infinity()) {
    double u = axis.output(e, i_meas, g.k1, g.k2);
    const bool clamped = std::fabs(u) > u_limit;
    if (clamped) u = std::copysign(u_limit, u);
    axis.advance(e, dt, g.omega_c, clamped);
    return u;
}

// Perturb-and-observe hill climb on the PV operating point, expressed as a
// duty-cycle increment for the boost stage (duty up = terminal voltage
// down). Keep walking in the direction that raised power, reverse otherwise.
inline double mppt_po(double p_now, double v_now, double p_prev, double v_prev,
                      double duty_step) {
    if (!(duty_step > 0.0)) throw InvalidInput("mppt_po: duty_step must be positive");
    const double v_dir = (v_now - v_prev >= 0.0) ? 1.0 : -1.0;
    const double keep = (p_now > p_prev) ? 1.0 : -1.0;
    return -duty_step * v_dir * keep;
}

// Proportional power loop for the fuel-cell converter: duty saturates at
// 0.95 and is normalized by one stack rating so the loop gain is
// dimensionless. The caller maps duty back to a per-stack power command.
inline double fc_power_control(double p_ref_w, double p_meas_w,
                               double p_base_w = 50e3) {
    if (!(p_base_w > 0.0)) throw InvalidInput("fc_power_control: base power must be positive");
    const double duty = 50.0 * (p_ref_w - p_meas_w) / p_base_w;
    return std::clamp(duty, 0.0, 0.95);
}

} // namespace pvfc
