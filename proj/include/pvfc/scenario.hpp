#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "pvfc/control.hpp"
#include "pvfc/controller.hpp"
#include "pvfc/ems.hpp"
#include "pvfc/errors.hpp"
#include "pvfc/plant.hpp"

namespace pvfc {

// Stepwise schedules: each point takes effect at its time and holds until
// the next point. Schedules must start at t = 0 and be strictly increasing.
struct DemandPoint {
    double t_s = 0.0;
    double p_w = 0.0;
    double q_var = 0.0;
};

struct IrradiancePoint {
    double t_s = 0.0;
    double g_w_m2 = 1000.0;
};

// Band-limited disturbance injection into the plant's zeta channels: white
// Gaussian noise through a one-pole low-pass, scaled to the given standard
// deviations. Zero amplitudes disable the generator entirely.
struct NoiseSpec {
    double zeta_dc_a = 0.0;       // dc-link current disturbance, A (std dev)
    double zeta_i_a_per_s = 0.0;  // per-axis current-slope disturbance, A/s (std dev)
    double corner_hz = 500.0;     // low-pass corner of the shaping filter
};

inline const std::vector<std::string>& default_channels() {
    static const std::vector<std::string> names{
        "time_s", "v_dc_V",   "i_a_A",      "i_b_A",  "i_c_A",
        "v_a_V",  "v_b_V",    "v_c_V",      "P_grid_W", "Q_grid_var",
        "P_pv_W", "P_fc_W",   "P_dump_W",   "mode"};
    return names;
}

// Everything a reproducible run needs: timing, the demand and irradiance
// staircases, grid faults, the plant (with its uncertainty scale factors),
// controller structure, where the gains come from, and output shaping.
struct ScenarioConfig {
    std::string name = "custom";
    int builtin_id = 0;  // 1..4 select the bundled study cases, 0 = custom
    double duration_s = 10.0;
    std::vector<DemandPoint> demand{{0.0, 0.0, 0.0}};
    std::vector<IrradiancePoint> irradiance{{0.0, 1000.0}};
    std::vector<SagSpec> sags;
    PlantParams plant{};
    EmsLimits limits{};
    SagSupportTuning support{};
    ControllerConfig controller{};
    std::string gains_file;              // empty: synthesize at run time
    std::optional<SystemGains> gains;    // in-process override, wins over both
    std::uint64_t seed = 0;
    NoiseSpec noise{};
    std::size_t decimation = 10;
    std::vector<std::string> channels = default_channels();
    double settle_exclusion_s = 0.3;     // dropped after each schedule/sag edge
};

inline void validate_scenario(const ScenarioConfig& cfg) {
    if (!(cfg.duration_s > 0.0) || !std::isfinite(cfg.duration_s))
        throw ConfigError("scenario: duration must be positive");
    const auto check_schedule = [&](const char* what, auto const& points) {
        if (points.empty()) throw ConfigError(std::string("scenario: empty ") + what + " schedule");
        if (points.front().t_s != 0.0)
            throw ConfigError(std::string("scenario: ") + what + " schedule must start at t = 0");
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (!std::isfinite(points[i].t_s))
                throw ConfigError(std::string("scenario: ") + what + " schedule time not finite");
            if (i > 0 && !(points[i].t_s > points[i - 1].t_s))
                throw ConfigError(std::string("scenario: ") + what +
                                  " schedule times must be strictly increasing");
            if (i > 0 && points[i].t_s >= cfg.duration_s)
                throw ConfigError(std::string("scenario: ") + what +
                                  " schedule point outside [0, duration)");
        }
    };
    check_schedule("demand", cfg.demand);
    check_schedule("irradiance", cfg.irradiance);
    for (const auto& p : cfg.demand)
        if (!std::isfinite(p.p_w) || !std::isfinite(p.q_var))
            throw ConfigError("scenario: demand values must be finite");
    for (const auto& p : cfg.irradiance)
        if (!(p.g_w_m2 >= 0.0) || !std::isfinite(p.g_w_m2))
            throw ConfigError("scenario: irradiance must be non-negative");
    validate_sags(cfg.sags);
    for (const auto& s : cfg.sags)
        if (s.start_s < 0.0 || s.end_s > cfg.duration_s + 1e-12)
            throw ConfigError("scenario: sag outside [0, duration]");
    validate_electrical(cfg.plant.elec);
    if (cfg.decimation < 1) throw ConfigError("scenario: decimation must be at least 1");
    if (!(cfg.noise.zeta_dc_a >= 0.0) || !(cfg.noise.zeta_i_a_per_s >= 0.0) ||
        !(cfg.noise.corner_hz > 0.0))
        throw ConfigError("scenario: invalid noise specification");
    if (!(cfg.settle_exclusion_s >= 0.0))
        throw ConfigError("scenario: settle exclusion must be non-negative");
    if (cfg.channels.empty()) throw ConfigError("scenario: channel list is empty");
    const auto& known = default_channels();
    for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
        if (std::find(known.begin(), known.end(), cfg.channels[i]) == known.end())
            throw ConfigError("scenario: unknown channel '" + cfg.channels[i] + "'");
        for (std::size_t j = i + 1; j < cfg.channels.size(); ++j)
            if (cfg.channels[i] == cfg.channels[j])
                throw ConfigError("scenario: duplicate channel '" + cfg.channels[i] + "'");
    }
    if (std::find(cfg.channels.begin(), cfg.channels.end(), "time_s") == cfg.channels.end())
        throw ConfigError("scenario: channel list must include time_s");
    validate_controller_config(cfg.controller);
}

inline Demand demand_at(const ScenarioConfig& cfg, double t) {
    Demand d;
    for (const auto& p : cfg.demand) {
        if (p.t_s > t) break;
        d.p_star_w = p.p_w;
        d.q_star_var = p.q_var;
    }
    return d;
}

inline double irradiance_at(const ScenarioConfig& cfg, double t) {
    double g = cfg.irradiance.front().g_w_m2;
    for (const auto& p : cfg.irradiance) {
        if (p.t_s > t) break;
        g = p.g_w_m2;
    }
    return g;
}

// The four bundled study cases: stepped real-power dispatch at full sun,
// the same with stepped reactive tracking, and a three-fault ride-through
// sequence at full and at weak sun.
inline ScenarioConfig builtin_case(int id) {
    ScenarioConfig cfg;
    cfg.builtin_id = id;
    cfg.duration_s = 10.0;
    switch (id) {
        case 1:
            cfg.name = "case1";
            cfg.demand = {{0.0, 150e3, 0.0}, {2.0, 220e3, 0.0}, {4.0, 80e3, 0.0},
                          {6.0, 150e3, 0.0}};
            cfg.irradiance = {{0.0, 1000.0}, {6.0, 300.0}, {8.0, 1000.0}};
            break;
        case 2:
            cfg.name = "case2";
            cfg.demand = {{0.0, 150e3, 100e3}, {2.0, 220e3, 200e3}, {4.0, 80e3, 150e3},
                          {6.0, 150e3, 100e3}};
            cfg.irradiance = {{0.0, 1000.0}, {6.0, 300.0}, {8.0, 1000.0}};
            break;
        case 3:
        case 4:
            cfg.name = id == 3 ? "case3" : "case4";
            cfg.demand = {{0.0, 150e3, 0.0}};
            cfg.irradiance = {{0.0, id == 3 ? 1000.0 : 300.0}};
            cfg.sags = {{1.0, 3.0, {0.70, 1.00, 1.00}},
                        {4.0, 6.0, {0.65, 0.65, 1.00}},
                        {7.0, 9.0, {0.60, 0.60, 0.60}}};
            break;
        default:
            throw ConfigError("unknown case id " + std::to_string(id) + " (expected 1..4)");
    }
    return cfg;
}

namespace detail {

inline void require_keys(const nlohmann::json& j, const char* where,
                         std::initializer_list<const char*> allowed) {
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : allowed)
            if (item.key() == k) ok = true;
        if (!ok)
            throw ConfigError(std::string("config: unknown key '") + item.key() + "' in " +
                              where);
    }
}

inline double num(const nlohmann::json& j, const char* where) {
    if (!j.is_number()) throw ConfigError(std::string("config: ") + where + " must be a number");
    return j.get<double>();
}

} // namespace detail

// JSON scenario description. Every key is optional; "case" starts from a
// bundled study case which the remaining keys then override. Unknown keys
// are rejected. The full schema is documented in the README.
inline ScenarioConfig load_scenario_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    detail::require_keys(j, "scenario",
                         {"name", "case", "duration_s", "seed", "decimation", "demand",
                          "irradiance", "sags", "uncertainty", "gains_file", "noise", "plant",
                          "channels", "settle_exclusion_s"});

    ScenarioConfig cfg;
    if (j.contains("case")) {
        if (!j["case"].is_number_integer()) throw ConfigError("config: case must be an integer");
        cfg = builtin_case(j["case"].get<int>());
    }
    if (j.contains("name")) {
        if (!j["name"].is_string()) throw ConfigError("config: name must be a string");
        cfg.name = j["name"].get<std::string>();
    }
    if (j.contains("duration_s")) cfg.duration_s = detail::num(j["duration_s"], "duration_s");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_integer()) throw ConfigError("config: seed must be an integer");
        cfg.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("decimation")) {
        if (!j["decimation"].is_number_integer() || j["decimation"].get<long long>() < 1)
            throw ConfigError("config: decimation must be a positive integer");
        cfg.decimation = j["decimation"].get<std::size_t>();
    }
    if (j.contains("demand")) {
        if (!j["demand"].is_array()) throw ConfigError("config: demand must be an array");
        cfg.demand.clear();
        for (const auto& p : j["demand"]) {
            detail::require_keys(p, "demand point", {"t_s", "p_w", "q_var"});
            DemandPoint d;
            if (p.contains("t_s")) d.t_s = detail::num(p["t_s"], "demand t_s");
            if (p.contains("p_w")) d.p_w = detail::num(p["p_w"], "demand p_w");
            if (p.contains("q_var")) d.q_var = detail::num(p["q_var"], "demand q_var");
            cfg.demand.push_back(d);
        }
    }
    if (j.contains("irradiance")) {
        if (!j["irradiance"].is_array()) throw ConfigError("config: irradiance must be an array");
        cfg.irradiance.clear();
        for (const auto& p : j["irradiance"]) {
            detail::require_keys(p, "irradiance point", {"t_s", "g_w_m2"});
            IrradiancePoint g;
            if (p.contains("t_s")) g.t_s = detail::num(p["t_s"], "irradiance t_s");
            if (p.contains("g_w_m2")) g.g_w_m2 = detail::num(p["g_w_m2"], "irradiance g_w_m2");
            cfg.irradiance.push_back(g);
        }
    }
    if (j.contains("sags")) {
        if (!j["sags"].is_array()) throw ConfigError("config: sags must be an array");
        cfg.sags.clear();
        for (const auto& p : j["sags"]) {
            detail::require_keys(p, "sag", {"start_s", "end_s", "retained"});
            SagSpec s;
            if (p.contains("start_s")) s.start_s = detail::num(p["start_s"], "sag start_s");
            if (p.contains("end_s")) s.end_s = detail::num(p["end_s"], "sag end_s");
            if (p.contains("retained")) {
                const auto& r = p["retained"];
                if (!r.is_array() || r.size() != 3)
                    throw ConfigError("config: sag retained must be an array of three numbers");
                for (std::size_t k = 0; k < 3; ++k)
                    s.retained[k] = detail::num(r[k], "sag retained");
            }
            cfg.sags.push_back(s);
        }
    }
    if (j.contains("uncertainty")) {
        const auto& u = j["uncertainty"];
        detail::require_keys(u, "uncertainty", {"r", "l", "c"});
        if (u.contains("r")) cfg.plant.elec.u_r = detail::num(u["r"], "uncertainty r");
        if (u.contains("l")) cfg.plant.elec.u_l = detail::num(u["l"], "uncertainty l");
        if (u.contains("c")) cfg.plant.elec.u_c = detail::num(u["c"], "uncertainty c");
    }
    if (j.contains("gains_file")) {
        if (!j["gains_file"].is_string())
            throw ConfigError("config: gains_file must be a string");
        cfg.gains_file = j["gains_file"].get<std::string>();
    }
    if (j.contains("noise")) {
        const auto& n = j["noise"];
        detail::require_keys(n, "noise", {"zeta_dc_a", "zeta_i_a_per_s", "corner_hz"});
        if (n.contains("zeta_dc_a")) cfg.noise.zeta_dc_a = detail::num(n["zeta_dc_a"], "noise");
        if (n.contains("zeta_i_a_per_s"))
            cfg.noise.zeta_i_a_per_s = detail::num(n["zeta_i_a_per_s"], "noise");
        if (n.contains("corner_hz")) cfg.noise.corner_hz = detail::num(n["corner_hz"], "noise");
    }
    if (j.contains("plant")) {
        const auto& p = j["plant"];
        detail::require_keys(p, "plant",
                             {"r_ohm", "l_h", "c_dc_f", "fc_tau_s", "fc_ramp_w_per_s",
                              "dc_collapse_v"});
        if (p.contains("r_ohm")) cfg.plant.elec.r_ohm = detail::num(p["r_ohm"], "plant r_ohm");
        if (p.contains("l_h")) cfg.plant.elec.l_h = detail::num(p["l_h"], "plant l_h");
        if (p.contains("c_dc_f")) cfg.plant.elec.c_dc_f = detail::num(p["c_dc_f"], "plant c_dc_f");
        if (p.contains("fc_tau_s")) cfg.plant.fc.tau_s = detail::num(p["fc_tau_s"], "plant fc_tau_s");
        if (p.contains("fc_ramp_w_per_s"))
            cfg.plant.fc.ramp_w_per_s = detail::num(p["fc_ramp_w_per_s"], "plant fc_ramp_w_per_s");
        if (p.contains("dc_collapse_v"))
            cfg.plant.dc_collapse_v = detail::num(p["dc_collapse_v"], "plant dc_collapse_v");
    }
    if (j.contains("settle_exclusion_s"))
        cfg.settle_exclusion_s = detail::num(j["settle_exclusion_s"], "settle_exclusion_s");
    if (j.contains("channels")) {
        if (!j["channels"].is_array()) throw ConfigError("config: channels must be an array");
        cfg.channels.clear();
        for (const auto& c : j["channels"]) {
            if (!c.is_string()) throw ConfigError("config: channels must be strings");
            cfg.channels.push_back(c.get<std::string>());
        }
    }
    validate_scenario(cfg);
    return cfg;
}

inline ScenarioConfig load_scenario_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << f.rdbuf();
    return load_scenario_json(buf.str());
}

} // namespace pvfc
