#pragma once

#include <algorithm>
#include <cmath>

#include "pvfc/errors.hpp"

namespace pvfc {

// Single-diode photovoltaic module scaled to an array of parallel strings.
// The module constants below are calibrated so the 330-module array peaks at
// 100.6 kW at 1000 W/m2, 25 C and 29.0 kW at 300 W/m2 (high-shunt module;
// photocurrent coefficient bisected against the array power anchor).
struct PvArrayParams {
    int parallel_strings = 66;
    int modules_per_string = 5;
    int cells_in_series = 96;
    double photocurrent_coeff_a_per_w_m2 = 5.8552409034632446e-3;  // I_ph = coeff * G
    double saturation_current_a = 6.4579168497327413e-12;
    double ideality = 0.945;
    double series_resistance_ohm = 0.37152;
    double shunt_resistance_ohm = 1500.0;
    double reference_irradiance_w_m2 = 1000.0;
    double reference_temperature_c = 25.0;
};

namespace detail {

inline double pv_thermal_voltage(double temperature_c) {
    constexpr double k_boltzmann = 1.380649e-23;
    constexpr double q_electron = 1.602176634e-19;
    return k_boltzmann * (temperature_c + 273.15) / q_electron;
}

}  // namespace detail

// Module current at module voltage v, from the implicit single-diode equation
//   I = I_ph - I_0*(exp((V + I*Rs)/a) - 1) - (V + I*Rs)/Rsh.
// Solved with a bracketed damped Newton iteration; f(I) is strictly
// decreasing, so [ -V/Rs, I_ph + 1 ] always brackets the root.
inline double pv_module_current(double v, double irradiance_w_m2, double temperature_c,
                                const PvArrayParams& p) {
    if (v < 0.0) throw InvalidInput("pv voltage must be non-negative");
    if (irradiance_w_m2 < 0.0) throw InvalidInput("irradiance must be non-negative");
    const double a = p.ideality * p.cells_in_series * detail::pv_thermal_voltage(temperature_c);
    const double i_ph = p.photocurrent_coeff_a_per_w_m2 * irradiance_w_m2;
    const double rs = p.series_resistance_ohm;
    const double rsh = p.shunt_resistance_ohm;
    const double i0 = p.saturation_current_a;

    const auto residual = [&](double i) {
        const double vd = v + i * rs;
        return i_ph - i0 * std::expm1(vd / a) - vd / rsh - i;
    };

    double lo = -v / rs;  // diode voltage 0 -> residual i_ph + v/rs >= 0
    // At the root the diode term balances at most i_ph + v/rs, which bounds
    // the diode voltage by a*log1p((i_ph + v/rs)/i0). Capping the bracket
    // there keeps every iterate out of the exponential-overflow region, where
    // Newton otherwise degenerates into constant-size steps.
    const double vd_max = a * std::log1p((i_ph - lo) / i0);
    double hi = std::min(i_ph + 1.0, (vd_max - v) / rs + 1.0);
    double i = std::min(i_ph, hi);
    double f = residual(i);
    for (int iter = 0; iter < 100; ++iter) {
        if (f > 0.0) lo = i; else hi = i;
        const double vd = v + i * rs;
        const double dfdi = -i0 * std::exp(vd / a) * rs / a - rs / rsh - 1.0;
        double next = i - f / dfdi;
        if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
        const double step = next - i;
        i = next;
        f = residual(i);
        if (std::abs(step) <= 1e-9 * std::max(1.0, std::abs(i))) return i;
    }
    throw ModelFault("pv module current iteration did not converge");
}

// Array current at array voltage v (series modules share v equally).
inline double pv_current(double v, double irradiance_w_m2, double temperature_c,
                         const PvArrayParams& p) {
    const double v_module = v / p.modules_per_string;
    return p.parallel_strings * pv_module_current(v_module, irradiance_w_m2, temperature_c, p);
}

// Array open-circuit voltage: at I = 0 the module equation becomes explicit,
//   0 = I_ph - I_0*(exp(V/a) - 1) - V/Rsh,
// solved by Newton from the shunt-free estimate a*log1p(I_ph/I_0).
inline double open_circuit_voltage(double irradiance_w_m2, double temperature_c,
                                   const PvArrayParams& p) {
    if (irradiance_w_m2 <= 0.0) return 0.0;
    const double a = p.ideality * p.cells_in_series * detail::pv_thermal_voltage(temperature_c);
    const double i_ph = p.photocurrent_coeff_a_per_w_m2 * irradiance_w_m2;
    const double i0 = p.saturation_current_a;
    double v = a * std::log1p(i_ph / i0);
    for (int iter = 0; iter < 100; ++iter) {
        const double f = i_ph - i0 * std::expm1(v / a) - v / p.shunt_resistance_ohm;
        const double dfdv = -i0 * std::exp(v / a) / a - 1.0 / p.shunt_resistance_ohm;
        const double step = f / dfdv;
        v -= step;
        if (std::abs(step) <= 1e-12 * std::max(1.0, std::abs(v)))
            return v * p.modules_per_string;
    }
    throw ModelFault("pv open-circuit voltage iteration did not converge");
}

struct PvMaxPower {
    double v = 0.0;
    double i = 0.0;
    double p = 0.0;
};

// Array maximum power point by golden-section search on the unimodal P(V).
inline PvMaxPower max_power(double irradiance_w_m2, double temperature_c,
                            const PvArrayParams& p) {
    if (irradiance_w_m2 <= 0.0) return {};
    const double v_oc = open_circuit_voltage(irradiance_w_m2, temperature_c, p);
    const auto power = [&](double v) {
        return v * pv_current(v, irradiance_w_m2, temperature_c, p);
    };
    constexpr double inv_phi = 0.61803398874989485;
    double lo = 0.0, hi = v_oc;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = power(x1), f2 = power(x2);
    for (int iter = 0; iter < 120 && hi - lo > 1e-9; ++iter) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = power(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = power(x1);
        }
    }
    const double v = 0.5 * (lo + hi);
    const double i = pv_current(v, irradiance_w_m2, temperature_c, p);
    return {v, i, v * i};
}

}  // namespace pvfc
