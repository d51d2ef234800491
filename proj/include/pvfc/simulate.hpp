#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pvfc/clarke.hpp"
#include "pvfc/controller.hpp"
#include "pvfc/design.hpp"
#include "pvfc/errors.hpp"
#include "pvfc/gains_io.hpp"
#include "pvfc/metrics.hpp"
#include "pvfc/plant.hpp"
#include "pvfc/scenario.hpp"
#include "pvfc/timeseries.hpp"

namespace pvfc {

struct RunResult {
    TimeSeries series;    // the channels the scenario asked for
    MetricsReport report;
    SystemGains gains;    // the gains the run actually used
};

inline SystemGains resolve_gains(const ScenarioConfig& cfg) {
    if (cfg.gains) return *cfg.gains;
    if (!cfg.gains_file.empty()) return load_gains_file(cfg.gains_file);
    return design_gains();
}

namespace detail {

// Stationary one-pole low-pass of unit-variance white noise, scaled to the
// requested standard deviation.
class ShapedNoise {
  public:
    ShapedNoise(double sigma, double corner_hz, double dt)
        : sigma_(sigma), a_(std::exp(-2.0 * std::numbers::pi * corner_hz * dt)),
          b_(std::sqrt(std::max(0.0, 1.0 - a_ * a_))) {}

    double step(std::mt19937_64& rng, std::normal_distribution<double>& n) {
        z_ = a_ * z_ + b_ * n(rng);
        return sigma_ * z_;
    }

  private:
    double sigma_;
    double a_, b_;
    double z_ = 0.0;
};

} // namespace detail

// Drive the plant with the digital controller over the scenario's horizon,
// recording the decimated run record and deriving its metrics. Identical
// configurations (including the seed) reproduce the series bit for bit. A
// dc-link collapse or a non-finite state ends the run early and is reported
// as an aborted run, never as a crash.
inline RunResult run_scenario(const ScenarioConfig& cfg) {
    validate_scenario(cfg);
    RunResult out;
    out.gains = resolve_gains(cfg);

    PlantParams plant = cfg.plant;
    plant.sags = cfg.sags;
    PlantController ctrl(out.gains, plant, cfg.limits, cfg.support, cfg.controller);
    PlantState s;

    const double dt = cfg.controller.dt;
    const auto n_steps = static_cast<std::size_t>(std::llround(cfg.duration_s / dt));

    TimeSeries& ts = out.series;
    ts.dt_s = dt * static_cast<double>(cfg.decimation);
    ts.channels = default_channels();
    ts.data.resize(ts.channels.size());
    const std::size_t n_rows = (n_steps + cfg.decimation - 1) / cfg.decimation;
    for (auto& col : ts.data) col.reserve(n_rows);

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss;
    const bool with_noise = cfg.noise.zeta_dc_a > 0.0 || cfg.noise.zeta_i_a_per_s > 0.0;
    detail::ShapedNoise noise_dc(cfg.noise.zeta_dc_a, cfg.noise.corner_hz, dt);
    detail::ShapedNoise noise_ia(cfg.noise.zeta_i_a_per_s, cfg.noise.corner_hz, dt);
    detail::ShapedNoise noise_ib(cfg.noise.zeta_i_a_per_s, cfg.noise.corner_hz, dt);

    MetricsReport& rep = out.report;
    for (std::size_t k = 0; k < n_steps; ++k) {
        const double t = s.time_s;
        PlantInputs in;
        try {
            in = ctrl.step(s, demand_at(cfg, t), irradiance_at(cfg, t));
        } catch (const ModelFault& e) {
            rep.aborted = true;
            rep.abort_reason = e.what();
            rep.abort_time_s = t;
            break;
        }

        if (k % cfg.decimation == 0) {
            if (!std::isfinite(s.v_dc_v) || !std::isfinite(s.i_alpha_a) ||
                !std::isfinite(s.i_beta_a) || !std::isfinite(s.v_pv_v)) {
                rep.aborted = true;
                rep.abort_reason = "state is no longer finite";
                rep.abort_time_s = t;
                break;
            }
            const PowerFlows flows = plant_flows(s, in, plant);
            const auto i_abc = inverse_clarke(s.i_alpha_a, s.i_beta_a);
            const auto v_abc = grid_voltages(t, plant.elec.grid, plant.sags);
            const double row[] = {t,
                                  s.v_dc_v,
                                  i_abc[0],
                                  i_abc[1],
                                  i_abc[2],
                                  v_abc[0],
                                  v_abc[1],
                                  v_abc[2],
                                  flows.p_grid_w,
                                  flows.q_grid_var,
                                  flows.p_pv_w,
                                  flows.p_fc_w,
                                  flows.p_dump_w,
                                  ctrl.mode() == EmsMode::sag ? 1.0 : 0.0};
            for (std::size_t c = 0; c < ts.data.size(); ++c) ts.data[c].push_back(row[c]);
        }

        if (with_noise) {
            in.zeta_dc_a = noise_dc.step(rng, gauss);
            in.zeta_alpha = noise_ia.step(rng, gauss);
            in.zeta_beta = noise_ib.step(rng, gauss);
        }
        try {
            s = plant_step(s, in, dt, plant);
        } catch (const DcCollapse& e) {
            rep.aborted = true;
            rep.abort_reason = e.what();
            rep.abort_time_s = e.time_s;
            break;
        } catch (const IntegrationFault& e) {
            rep.aborted = true;
            rep.abort_reason = e.what();
            rep.abort_time_s = t;
            break;
        } catch (const ModelFault& e) {
            rep.aborted = true;
            rep.abort_reason = e.what();
            rep.abort_time_s = t;
            break;
        }
    }

    {
        const bool aborted = rep.aborted;
        const std::string reason = rep.abort_reason;
        const double when = rep.abort_time_s;
        rep = compute_metrics(ts, cfg);
        rep.aborted = aborted;
        rep.abort_reason = reason;
        rep.abort_time_s = when;
    }
    evaluate_criteria(rep);

    if (cfg.channels != ts.channels) {
        TimeSeries selected;
        selected.dt_s = ts.dt_s;
        selected.channels = cfg.channels;
        for (const auto& name : cfg.channels)
            selected.data.push_back(std::move(ts.data[ts.column(name)]));
        out.series = std::move(selected);
    }
    return out;
}

} // namespace pvfc
