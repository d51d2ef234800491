#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "pvfc/errors.hpp"

namespace pvfc {

// Uniformly sampled run record: one named column per signal, stored
// column-major so metric extraction can hand whole channels to the DFT.
// The first channel is always the sample time.
struct TimeSeries {
    double dt_s = 0.0;                      // spacing between rows
    std::vector<std::string> channels;      // column names, emission order
    std::vector<std::vector<double>> data;  // data[column][row]

    std::size_t size() const { return data.empty() ? 0 : data.front().size(); }

    bool has(std::string_view name) const {
        for (const auto& c : channels)
            if (c == name) return true;
        return false;
    }

    std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < channels.size(); ++i)
            if (channels[i] == name) return i;
        throw ConfigError("time series is missing channel '" + std::string(name) + "'");
    }

    const std::vector<double>& channel(std::string_view name) const {
        return data[column(name)];
    }
};

namespace detail {

// Shortest text that parses back to the same double: deterministic,
// locale-independent, decimal point only.
inline void append_double(std::string& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

inline double parse_double(std::string_view text) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last)
        throw ConfigError("csv: malformed numeric field '" + std::string(text) + "'");
    return v;
}

} // namespace detail

inline std::string to_csv(const TimeSeries& ts) {
    if (ts.channels.empty()) throw ConfigError("csv: time series has no channels");
    if (ts.channels.size() != ts.data.size())
        throw ConfigError("csv: channel names and data columns disagree");
    for (const auto& col : ts.data)
        if (col.size() != ts.size()) throw ConfigError("csv: ragged data columns");

    std::string out;
    out.reserve(32 * ts.channels.size() * (ts.size() + 1));
    for (std::size_t c = 0; c < ts.channels.size(); ++c) {
        if (c) out.push_back(',');
        out += ts.channels[c];
    }
    out.push_back('\n');
    for (std::size_t r = 0; r < ts.size(); ++r) {
        for (std::size_t c = 0; c < ts.data.size(); ++c) {
            if (c) out.push_back(',');
            detail::append_double(out, ts.data[c][r]);
        }
        out.push_back('\n');
    }
    return out;
}

inline void write_csv(const TimeSeries& ts, std::ostream& os) {
    const std::string text = to_csv(ts);
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
}

inline void save_csv(const TimeSeries& ts, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("csv: cannot open '" + path + "' for writing");
    write_csv(ts, f);
    if (!f) throw ConfigError("csv: write to '" + path + "' failed");
}

// Parse a run record back; the sample spacing is recovered from the first
// two rows of the time channel, so a single-row file has dt 0.
inline TimeSeries from_csv(std::istream& is) {
    TimeSeries ts;
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    {
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            const std::string name =
                line.substr(start, comma == std::string::npos ? comma : comma - start);
            if (name.empty()) throw ConfigError("csv: empty column name in header");
            ts.channels.push_back(name);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    }
    ts.data.resize(ts.channels.size());

    std::size_t row = 0;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t start = 0, col = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            const std::string_view field =
                std::string_view(line).substr(start,
                                              comma == std::string::npos ? comma : comma - start);
            if (col >= ts.channels.size())
                throw ConfigError("csv: row has more fields than the header");
            ts.data[col].push_back(detail::parse_double(field));
            ++col;
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (col != ts.channels.size())
            throw ConfigError("csv: row has fewer fields than the header");
        ++row;
    }
    if (ts.has("time_s")) {
        const auto& t = ts.channel("time_s");
        if (t.size() >= 2) ts.dt_s = t[1] - t[0];
    }
    return ts;
}

inline TimeSeries load_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("csv: cannot open '" + path + "'");
    return from_csv(f);
}

} // namespace pvfc
