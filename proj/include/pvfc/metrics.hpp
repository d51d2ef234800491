#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "pvfc/dft.hpp"
#include "pvfc/errors.hpp"
#include "pvfc/scenario.hpp"
#include "pvfc/timeseries.hpp"

namespace pvfc {

struct ChannelStats {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double min = std::numeric_limits<double>::quiet_NaN();
    double max = std::numeric_limits<double>::quiet_NaN();
};

// One stretch of the run between schedule or fault edges. Power statistics
// use the steady window (the interval minus the settling exclusion); peak
// trackers use the whole interval.
struct IntervalMetrics {
    double t_begin = 0.0;
    double t_end = 0.0;
    double steady_begin = 0.0;
    int sag_phases = 0;          // phases below nominal amplitude; 0 = normal
    double min_retained = 1.0;

    ChannelStats p_grid_w, q_grid_var, p_pv_w, p_fc_w, p_dump_w, v_dc_v;
    double v_dc_peak_err_v = std::numeric_limits<double>::quiet_NaN();
    double v_dc_steady_err_v = std::numeric_limits<double>::quiet_NaN();
    double v_dc_band_frac = std::numeric_limits<double>::quiet_NaN();
    double p_ripple_pct = std::numeric_limits<double>::quiet_NaN();
    std::array<double, 3> i_peak_a{std::numeric_limits<double>::quiet_NaN(),
                                   std::numeric_limits<double>::quiet_NaN(),
                                   std::numeric_limits<double>::quiet_NaN()};
    std::array<double, 3> thd_pct{std::numeric_limits<double>::quiet_NaN(),
                                  std::numeric_limits<double>::quiet_NaN(),
                                  std::numeric_limits<double>::quiet_NaN()};
    double thd_worst_pct = std::numeric_limits<double>::quiet_NaN();
    double q_dominant_hz = std::numeric_limits<double>::quiet_NaN();
};

struct CriterionResult {
    std::string id;
    bool gating = true;  // informational entries report without deciding pass/fail
    bool pass = false;
    std::string detail;
};

struct MetricsReport {
    std::string scenario;
    int builtin_id = 0;
    bool aborted = false;
    std::string abort_reason;
    double abort_time_s = 0.0;

    double v_dc_ref_v = 800.0;
    double v_dc_band_v = 4.0;  // ±0.5% of the reference
    double i_limit_a = 0.0;    // rated amplitude + 2%
    double exclusion_s = 0.3;

    std::vector<IntervalMetrics> intervals;
    std::vector<CriterionResult> criteria;

    bool all_pass() const {
        if (aborted) return false;
        if (criteria.empty()) return false;
        for (const auto& c : criteria)
            if (c.gating && !c.pass) return false;
        return true;
    }
};

namespace detail {

struct IntervalSpan {
    double t0 = 0.0, t1 = 0.0;
    int sag_phases = 0;
    double min_retained = 1.0;
};

inline std::vector<IntervalSpan> interval_partition(const ScenarioConfig& cfg) {
    std::vector<double> edges{0.0, cfg.duration_s};
    for (std::size_t i = 1; i < cfg.demand.size(); ++i) edges.push_back(cfg.demand[i].t_s);
    for (std::size_t i = 1; i < cfg.irradiance.size(); ++i) edges.push_back(cfg.irradiance[i].t_s);
    for (const auto& s : cfg.sags) {
        edges.push_back(std::clamp(s.start_s, 0.0, cfg.duration_s));
        edges.push_back(std::clamp(s.end_s, 0.0, cfg.duration_s));
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end(),
                            [](double a, double b) { return std::fabs(a - b) < 1e-9; }),
                edges.end());

    std::vector<IntervalSpan> spans;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        IntervalSpan sp;
        sp.t0 = edges[i];
        sp.t1 = edges[i + 1];
        const double mid = 0.5 * (sp.t0 + sp.t1);
        for (const auto& s : cfg.sags) {
            if (mid < s.start_s || mid >= s.end_s) continue;
            for (double r : s.retained) {
                if (r < 1.0) ++sp.sag_phases;
                sp.min_retained = std::min(sp.min_retained, r);
            }
        }
        spans.push_back(sp);
    }
    return spans;
}

inline std::size_t sample_index(const std::vector<double>& t, double when) {
    return static_cast<std::size_t>(
        std::lower_bound(t.begin(), t.end(), when - 1e-9) - t.begin());
}

inline ChannelStats window_stats(const std::vector<double>& x, std::size_t b, std::size_t e) {
    ChannelStats st;
    if (b >= e) return st;
    double sum = 0.0, lo = x[b], hi = x[b];
    for (std::size_t i = b; i < e; ++i) {
        sum += x[i];
        lo = std::min(lo, x[i]);
        hi = std::max(hi, x[i]);
    }
    st.mean = sum / static_cast<double>(e - b);
    st.min = lo;
    st.max = hi;
    return st;
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

} // namespace detail

// Interval statistics and spectral measures for one finished (or aborted)
// run. The series must carry the power, voltage and current channels; the
// scenario supplies the edges that delimit the intervals.
inline MetricsReport compute_metrics(const TimeSeries& ts, const ScenarioConfig& cfg) {
    MetricsReport rep;
    rep.scenario = cfg.name;
    rep.builtin_id = cfg.builtin_id;
    rep.v_dc_ref_v = cfg.controller.v_dc_ref_v;
    rep.v_dc_band_v = 0.005 * cfg.controller.v_dc_ref_v;
    rep.i_limit_a = 1.02 * cfg.limits.i_rated_a;
    rep.exclusion_s = cfg.settle_exclusion_s;

    const auto& t = ts.channel("time_s");
    const auto& v_dc = ts.channel("v_dc_V");
    const auto& p = ts.channel("P_grid_W");
    const auto& q = ts.channel("Q_grid_var");
    const auto& p_pv = ts.channel("P_pv_W");
    const auto& p_fc = ts.channel("P_fc_W");
    const auto& p_dump = ts.channel("P_dump_W");
    const std::array<const std::vector<double>*, 3> i_abc{
        &ts.channel("i_a_A"), &ts.channel("i_b_A"), &ts.channel("i_c_A")};

    const double fs = ts.dt_s > 0.0 ? 1.0 / ts.dt_s : 0.0;
    const double f0 = cfg.plant.elec.grid.f_hz;
    std::size_t n_harm = 0;
    if (fs > 0.0) {
        const double max_h = fs / (2.0 * f0) - 1.0;
        if (max_h >= 2.0) n_harm = std::min<std::size_t>(40, static_cast<std::size_t>(max_h));
    }

    for (const auto& sp : detail::interval_partition(cfg)) {
        IntervalMetrics m;
        m.t_begin = sp.t0;
        m.t_end = sp.t1;
        m.steady_begin = std::min(sp.t0 + cfg.settle_exclusion_s, sp.t1);
        m.sag_phases = sp.sag_phases;
        m.min_retained = sp.min_retained;

        const std::size_t b = detail::sample_index(t, sp.t0);
        const std::size_t e = std::min(detail::sample_index(t, sp.t1), ts.size());
        const std::size_t s = std::min(detail::sample_index(t, m.steady_begin), e);

        m.p_grid_w = detail::window_stats(p, s, e);
        m.q_grid_var = detail::window_stats(q, s, e);
        m.p_pv_w = detail::window_stats(p_pv, s, e);
        m.p_fc_w = detail::window_stats(p_fc, s, e);
        m.p_dump_w = detail::window_stats(p_dump, s, e);
        m.v_dc_v = detail::window_stats(v_dc, s, e);

        if (e > b) {
            double peak = 0.0;
            for (std::size_t i = b; i < e; ++i)
                peak = std::max(peak, std::fabs(v_dc[i] - rep.v_dc_ref_v));
            m.v_dc_peak_err_v = peak;
            for (int ph = 0; ph < 3; ++ph) {
                double ipk = 0.0;
                for (std::size_t i = b; i < e; ++i)
                    ipk = std::max(ipk, std::fabs((*i_abc[ph])[i]));
                m.i_peak_a[ph] = ipk;
            }
        }
        if (e > s) {
            double err = 0.0;
            std::size_t inside = 0;
            for (std::size_t i = s; i < e; ++i) {
                const double d = std::fabs(v_dc[i] - rep.v_dc_ref_v);
                err = std::max(err, d);
                if (d <= rep.v_dc_band_v) ++inside;
            }
            m.v_dc_steady_err_v = err;
            m.v_dc_band_frac = static_cast<double>(inside) / static_cast<double>(e - s);
            if (std::fabs(m.p_grid_w.mean) > 1.0)
                m.p_ripple_pct =
                    100.0 * (m.p_grid_w.max - m.p_grid_w.min) / std::fabs(m.p_grid_w.mean);
        }

        // Spectral measures over whole fundamental cycles of the steady window.
        if (n_harm >= 2 && e > s && fs > 0.0) {
            const double cycles = std::floor(static_cast<double>(e - s) * f0 / fs + 1e-9);
            if (cycles >= 2.0) {
                const auto n_use =
                    static_cast<std::size_t>(std::llround(cycles * fs / f0));
                double worst = 0.0;
                bool any = false;
                for (int ph = 0; ph < 3; ++ph) {
                    try {
                        m.thd_pct[ph] = thd({i_abc[ph]->data() + s, n_use}, f0, fs, n_harm);
                        worst = std::max(worst, m.thd_pct[ph]);
                        any = true;
                    } catch (const UndefinedThd&) {
                        // dead phase: leave NaN
                    }
                }
                if (any) m.thd_worst_pct = worst;
                const Spectrum sq = harmonic_spectrum({q.data() + s, n_use}, f0, fs, n_harm);
                std::size_t k_best = 1;
                for (std::size_t k = 1; k <= n_harm; ++k)
                    if (sq.amplitude[k - 1] > sq.amplitude[k_best - 1]) k_best = k;
                m.q_dominant_hz = static_cast<double>(k_best) * f0;
            }
        }
        rep.intervals.push_back(m);
    }
    return rep;
}

namespace detail {

inline void add_criterion(MetricsReport& rep, std::string id, bool gating, bool pass,
                          std::string detail_text) {
    rep.criteria.push_back({std::move(id), gating, pass, std::move(detail_text)});
}

inline bool in_band(double v, double lo, double hi) { return v >= lo && v <= hi; }

inline std::string band_text(double v, double lo, double hi) {
    return fmt(v) + " vs [" + fmt(lo) + ", " + fmt(hi) + "]";
}

// Interval-mean test against a symmetric band around a target.
inline void mean_band_criterion(MetricsReport& rep, const std::string& id, double mean,
                                double target, double half_width, bool gating = true) {
    const double lo = target - half_width, hi = target + half_width;
    add_criterion(rep, id, gating, in_band(mean, lo, hi), "mean " + band_text(mean, lo, hi));
}

} // namespace detail

// Attach pass/fail verdicts. Structural checks apply to every scenario; the
// bundled study cases additionally carry their published expectations.
inline void evaluate_criteria(MetricsReport& rep) {
    using detail::add_criterion;
    using detail::band_text;
    using detail::fmt;
    using detail::in_band;

    if (rep.aborted) {
        add_criterion(rep, "completes", true, false,
                      "aborted at t = " + fmt(rep.abort_time_s) + " s: " + rep.abort_reason);
    } else {
        add_criterion(rep, "completes", true, true, "run reached the configured duration");
    }

    // Whole-run peak phase amplitude, informational: the rating gate applies
    // to ride-through intervals, where it is enforced per sag below. Normal
    // step transients may touch the limiter while the tracking loop
    // re-converges.
    double i_peak = 0.0;
    for (const auto& m : rep.intervals)
        for (double v : m.i_peak_a)
            if (std::isfinite(v)) i_peak = std::max(i_peak, v);
    add_criterion(rep, "current-rating", false, i_peak <= rep.i_limit_a,
                  "peak phase amplitude " + fmt(i_peak) + " A vs limit " + fmt(rep.i_limit_a) +
                      " A");

    // dc-link steady band: gating only where the study cases require it.
    double dc_worst = 0.0;
    bool dc_have = false;
    for (const auto& m : rep.intervals)
        if (std::isfinite(m.v_dc_steady_err_v)) {
            dc_worst = std::max(dc_worst, m.v_dc_steady_err_v);
            dc_have = true;
        }
    const bool dc_ok = dc_have && dc_worst <= rep.v_dc_band_v;
    add_criterion(rep, "dc-steady-band", rep.builtin_id == 1, dc_ok,
                  "worst settled deviation " + fmt(dc_worst) + " V vs " + fmt(rep.v_dc_band_v) +
                      " V");

    const auto interval_count_is = [&](std::size_t n) {
        if (rep.intervals.size() == n) return true;
        add_criterion(rep, "interval-structure", true, false,
                      "expected " + std::to_string(n) + " intervals, found " +
                          std::to_string(rep.intervals.size()));
        return false;
    };

    if (rep.builtin_id == 1 || rep.builtin_id == 2) {
        if (!interval_count_is(5)) return;
        static constexpr std::array<double, 5> p_target_w{150e3, 200e3, 80e3, 129.5e3, 150e3};
        for (std::size_t i = 0; i < 5; ++i)
            detail::mean_band_criterion(rep, "p-grid-interval-" + std::to_string(i + 1),
                                        rep.intervals[i].p_grid_w.mean, p_target_w[i],
                                        0.02 * p_target_w[i]);
        if (rep.builtin_id == 1) {
            static constexpr std::array<double, 5> fc_target_w{50e3, 100e3, 0.0, 100e3, 50e3};
            for (std::size_t i = 0; i < 5; ++i)
                detail::mean_band_criterion(rep, "p-fc-interval-" + std::to_string(i + 1),
                                            rep.intervals[i].p_fc_w.mean, fc_target_w[i], 3e3);
            detail::mean_band_criterion(rep, "p-dump-surplus", rep.intervals[2].p_dump_w.mean,
                                        20e3, 0.05 * 20e3);
            for (std::size_t i = 0; i < 5; ++i)
                detail::mean_band_criterion(rep, "q-grid-zero-interval-" + std::to_string(i + 1),
                                            rep.intervals[i].q_grid_var.mean, 0.0, 2e3);
        } else {
            static constexpr std::array<double, 5> q_target_var{100e3, -1.0, 150e3, 100e3,
                                                                100e3};
            for (std::size_t i = 0; i < 5; ++i) {
                if (i == 1) {
                    const double mean = rep.intervals[1].q_grid_var.mean;
                    add_criterion(rep, "q-circle-limited-interval-2", true,
                                  in_band(mean, 89e3, 95e3),
                                  "mean " + band_text(mean, 89e3, 95e3));
                } else {
                    detail::mean_band_criterion(rep, "q-grid-interval-" + std::to_string(i + 1),
                                                rep.intervals[i].q_grid_var.mean, q_target_var[i],
                                                2e3);
                }
            }
        }
        return;
    }

    if (rep.builtin_id == 3 || rep.builtin_id == 4) {
        if (!interval_count_is(7)) return;
        static constexpr std::array<double, 3> q_level_var{75e3, 100e3, 14e3};
        std::size_t sag_no = 0;
        for (const auto& m : rep.intervals) {
            if (m.sag_phases == 0) continue;
            ++sag_no;
            const std::string tag = "sag" + std::to_string(sag_no);
            const bool unbalanced = m.sag_phases < 3;

            double ipk = 0.0;
            for (double v : m.i_peak_a)
                if (std::isfinite(v)) ipk = std::max(ipk, v);
            add_criterion(rep, tag + "-current-rating", true, ipk <= rep.i_limit_a,
                          "peak phase amplitude " + fmt(ipk) + " A vs limit " +
                              fmt(rep.i_limit_a) + " A");
            add_criterion(rep, tag + "-q-positive", true, m.q_grid_var.mean > 0.0,
                          "mean reactive export " + fmt(m.q_grid_var.mean) + " var");
            if (unbalanced) {
                add_criterion(rep, tag + "-p-ripple", true, m.p_ripple_pct < 5.0,
                              "peak-to-peak ripple " + fmt(m.p_ripple_pct) + " % vs 5 %");
                add_criterion(rep, tag + "-thd", true, m.thd_worst_pct < 5.0,
                              "worst-phase THD " + fmt(m.thd_worst_pct) + " % vs 5 %");
                add_criterion(rep, tag + "-q-120hz", true,
                              std::fabs(m.q_dominant_hz - 120.0) < 1e-6,
                              "dominant reactive-power line at " + fmt(m.q_dominant_hz) + " Hz");
            }
            if (m.sag_phases == 2)
                add_criterion(rep, tag + "-dc-band", true,
                              m.v_dc_steady_err_v <= rep.v_dc_band_v,
                              "settled deviation " + fmt(m.v_dc_steady_err_v) + " V vs " +
                                  fmt(rep.v_dc_band_v) + " V");
            if (sag_no <= q_level_var.size()) {
                const double target = q_level_var[sag_no - 1];
                add_criterion(rep, tag + "-q-level", false,
                              in_band(m.q_grid_var.mean, 0.8 * target, 1.2 * target),
                              "mean " + band_text(m.q_grid_var.mean, 0.8 * target, 1.2 * target));
            }
        }
        if (rep.builtin_id == 4) {
            std::size_t normal_no = 0;
            for (const auto& m : rep.intervals) {
                if (m.sag_phases != 0) continue;
                ++normal_no;
                detail::mean_band_criterion(rep, "p-grid-normal-" + std::to_string(normal_no),
                                            m.p_grid_w.mean, 129.5e3, 0.03 * 129.5e3);
            }
        }
    }
}

inline std::string render_report(const MetricsReport& rep) {
    using detail::fmt;
    std::string out;
    out += "scenario: " + rep.scenario;
    if (rep.builtin_id) out += " (case " + std::to_string(rep.builtin_id) + ")";
    out += "\n";
    if (rep.aborted)
        out += "status: ABORTED at t = " + fmt(rep.abort_time_s) + " s (" + rep.abort_reason +
               ")\n";
    else
        out += "status: completed\n";
    out += "intervals (means over settled window):\n";
    for (const auto& m : rep.intervals) {
        out += "  [" + fmt(m.t_begin) + ", " + fmt(m.t_end) + ") ";
        out += m.sag_phases ? "sag(" + std::to_string(m.sag_phases) + "ph)" : "normal";
        out += "  P " + fmt(m.p_grid_w.mean / 1e3) + " kW";
        out += "  Q " + fmt(m.q_grid_var.mean / 1e3) + " kvar";
        out += "  Ppv " + fmt(m.p_pv_w.mean / 1e3) + " kW";
        out += "  Pfc " + fmt(m.p_fc_w.mean / 1e3) + " kW";
        out += "  Pdump " + fmt(m.p_dump_w.mean / 1e3) + " kW";
        out += "  vdc_err " + fmt(m.v_dc_steady_err_v) + " V";
        if (m.sag_phases && std::isfinite(m.thd_worst_pct))
            out += "  THD " + fmt(m.thd_worst_pct) + " %";
        out += "\n";
    }
    out += "criteria:\n";
    for (const auto& c : rep.criteria) {
        out += c.gating ? (c.pass ? "  PASS " : "  FAIL ") : (c.pass ? "  info " : "  INFO ");
        out += c.id + ": " + c.detail + "\n";
    }
    out += rep.all_pass() ? "overall: PASS\n" : "overall: FAIL\n";
    return out;
}

} // namespace pvfc
