#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "pvfc/control.hpp"
#include "pvfc/errors.hpp"
#include "pvfc/timeseries.hpp"

namespace pvfc {

// Controller gains travel between the synthesis tool and the scenario
// runner as a flat `key = value` text file. Matrix entries are flattened as
// `NAME.row.col`. Values use shortest round-trip formatting, so a
// write/load cycle reproduces the gains bit for bit.
inline std::string to_gains_text(const SystemGains& g) {
    std::string out;
    out.reserve(512);
    const auto scalar = [&](std::string_view key, double v) {
        out += key;
        out += " = ";
        detail::append_double(out, v);
        out.push_back('\n');
    };
    scalar("k_dc", g.k_dc);
    scalar("alpha", g.alpha);
    scalar("epsilon", g.epsilon);
    scalar("k1", g.k1);
    scalar("k2", g.k2);
    scalar("omega_c", g.omega_c);
    scalar("lambda", g.lambda);
    scalar("tau_i", g.tau_i);
    scalar("gamma", g.gamma);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            std::string key = "K_dc." + std::to_string(i) + "." + std::to_string(j);
            scalar(key, g.k_obs(i, j));
        }
    for (std::size_t i = 0; i < 2; ++i)
        scalar("L_dc." + std::to_string(i) + ".0", g.l_obs(i, 0));
    return out;
}

inline void save_gains_file(const SystemGains& g, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("gains: cannot open '" + path + "' for writing");
    const std::string text = to_gains_text(g);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw ConfigError("gains: write to '" + path + "' failed");
}

inline SystemGains from_gains_text(const std::string& text) {
    std::map<std::string, double> kv;
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("gains: line " + std::to_string(line_no) + " has no '='");
        const auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("gains: line " + std::to_string(line_no) + " has no key");
        if (!kv.emplace(key, detail::parse_double(value)).second)
            throw ConfigError("gains: duplicate key '" + key + "'");
    }

    const auto take = [&](const std::string& key) {
        const auto it = kv.find(key);
        if (it == kv.end()) throw ConfigError("gains: missing key '" + key + "'");
        const double v = it->second;
        kv.erase(it);
        return v;
    };

    SystemGains g;
    g.k_dc = take("k_dc");
    g.alpha = take("alpha");
    g.epsilon = take("epsilon");
    g.k1 = take("k1");
    g.k2 = take("k2");
    g.omega_c = take("omega_c");
    g.lambda = take("lambda");
    g.tau_i = take("tau_i");
    g.gamma = take("gamma");
    Mat k(2, 2);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            k(i, j) = take("K_dc." + std::to_string(i) + "." + std::to_string(j));
    Mat l(2, 1);
    for (std::size_t i = 0; i < 2; ++i) l(i, 0) = take("L_dc." + std::to_string(i) + ".0");
    if (!kv.empty()) throw ConfigError("gains: unknown key '" + kv.begin()->first + "'");

    try {
        g.k_obs = SymMatrix(k);
        g.l_obs = l;
        validate_gains(g);
    } catch (const Error& e) {
        throw ConfigError(std::string("gains: ") + e.what());
    }
    return g;
}

inline SystemGains load_gains_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("gains: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << f.rdbuf();
    return from_gains_text(buf.str());
}

} // namespace pvfc
