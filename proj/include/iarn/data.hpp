#pragma once

// Series ingestion and supervised-sample construction.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "iarn/error.hpp"

namespace iarn {

using Timestamp = std::chrono::sys_seconds;

struct SeriesRecord {
    Timestamp timestamp;
    double value = 0.0;

    friend bool operator==(const SeriesRecord&, const SeriesRecord&) = default;
};

using Series = std::vector<SeriesRecord>;

// ---------------------------------------------------------------------------
// Timestamps

namespace detail {

inline bool parse_fixed_int(std::string_view s, std::size_t pos, std::size_t width, int& out) {
    if (pos + width > s.size()) return false;
    int v = 0;
    for (std::size_t i = pos; i < pos + width; ++i) {
        if (s[i] < '0' || s[i] > '9') return false;
        v = v * 10 + (s[i] - '0');
    }
    out = v;
    return true;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace detail

/// Parses `YYYY-MM-DDTHH:MM:SS` followed by `Z` or `+HH:MM` / `-HH:MM`.
/// Returns false on any deviation from that form.
inline bool parse_timestamp(std::string_view s, Timestamp& out) {
    using namespace std::chrono;
    int y, mo, d, h, mi, sec;
    if (s.size() < 20) return false;
    if (!detail::parse_fixed_int(s, 0, 4, y) || s[4] != '-' || !detail::parse_fixed_int(s, 5, 2, mo) || s[7] != '-' ||
        !detail::parse_fixed_int(s, 8, 2, d) || (s[10] != 'T' && s[10] != 't') ||
        !detail::parse_fixed_int(s, 11, 2, h) || s[13] != ':' || !detail::parse_fixed_int(s, 14, 2, mi) ||
        s[16] != ':' || !detail::parse_fixed_int(s, 17, 2, sec))
        return false;
    if (h > 23 || mi > 59 || sec > 59) return false;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return false;
    int offset_minutes = 0;
    const std::string_view zone = s.substr(19);
    if (zone == "Z" || zone == "z") {
        offset_minutes = 0;
    } else if (zone.size() == 6 && (zone[0] == '+' || zone[0] == '-') && zone[3] == ':') {
        int oh, om;
        if (!detail::parse_fixed_int(zone, 1, 2, oh) || !detail::parse_fixed_int(zone, 4, 2, om)) return false;
        if (oh > 23 || om > 59) return false;
        offset_minutes = (zone[0] == '+' ? 1 : -1) * (oh * 60 + om);
    } else {
        return false;
    }
    out = sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec} - minutes{offset_minutes};
    return true;
}

/// UTC rendering, `YYYY-MM-DDTHH:MM:SSZ`.
inline std::string format_timestamp(Timestamp ts) {
    using namespace std::chrono;
    const sys_days day_point = floor<days>(ts);
    const year_month_day ymd{day_point};
    const hh_mm_ss<seconds> tod{ts - day_point};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                  static_cast<int>(tod.seconds().count()));
    return buf;
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// CSV

/// Reads `timestamp,value` CSV. Output is sorted by timestamp; duplicates are rejected.
inline Series parse_csv(std::istream& in) {
    struct Row {
        SeriesRecord rec;
        std::size_t line;
    };
    std::vector<Row> rows;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view row = detail::trim(line);
        if (!header_seen) {
            if (row.empty()) continue;
            std::string_view h = row;
            if (h.size() >= 3 && static_cast<unsigned char>(h[0]) == 0xEF) h.remove_prefix(3);  // UTF-8 BOM
            if (h != "timestamp,value") throw ParseError(line_no, "expected header 'timestamp,value'");
            header_seen = true;
            continue;
        }
        if (row.empty()) continue;
        const auto comma = row.find(',');
        if (comma == std::string_view::npos || row.find(',', comma + 1) != std::string_view::npos)
            throw ParseError(line_no, "expected exactly two fields");
        const std::string_view ts_text = detail::trim(row.substr(0, comma));
        const std::string_view val_text = detail::trim(row.substr(comma + 1));
        SeriesRecord rec;
        if (!parse_timestamp(ts_text, rec.timestamp))
            throw ParseError(line_no, "invalid timestamp '" + std::string(ts_text) + "'");
        std::string_view num = val_text;
        if (!num.empty() && num.front() == '+') num.remove_prefix(1);
        const auto res = std::from_chars(num.data(), num.data() + num.size(), rec.value);
        if (num.empty() || res.ec != std::errc() || res.ptr != num.data() + num.size())
            throw ParseError(line_no, "invalid value '" + std::string(val_text) + "'");
        if (!std::isfinite(rec.value)) throw ParseError(line_no, "non-finite value");
        rows.push_back({rec, line_no});
    }
    if (!header_seen) throw ParseError(1, "empty file");
    if (rows.empty()) throw ParseError(line_no, "no data rows");
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.rec.timestamp < b.rec.timestamp; });
    Series out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i > 0 && rows[i].rec.timestamp == rows[i - 1].rec.timestamp)
            throw ParseError(std::max(rows[i].line, rows[i - 1].line),
                             "duplicate timestamp " + format_timestamp(rows[i].rec.timestamp));
        out.push_back(rows[i].rec);
    }
    return out;
}

inline Series parse_csv_text(const std::string& text) {
    std::istringstream in(text);
    return parse_csv(in);
}

inline Series read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open data file '" + path + "'");
    return parse_csv(in);
}

inline void write_csv(std::ostream& out, std::span<const SeriesRecord> series) {
    out << "timestamp,value\n";
    for (const auto& r : series) out << format_timestamp(r.timestamp) << ',' << format_double(r.value) << '\n';
}

inline std::string to_csv(std::span<const SeriesRecord> series) {
    std::ostringstream out;
    write_csv(out, series);
    return out.str();
}

inline std::vector<double> values_of(std::span<const SeriesRecord> series) {
    std::vector<double> v;
    v.reserve(series.size());
    for (const auto& r : series) v.push_back(r.value);
    return v;
}

// ---------------------------------------------------------------------------
// Splitting and scaling

struct SeriesSplit {
    Series train;
    Series test;
};

/// Chronological split: the first ceil(fraction * n) records train, the rest test.
inline SeriesSplit split_series(std::span<const SeriesRecord> series, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("split_series: train fraction must lie in (0, 1)");
    if (series.size() < 2) throw ConfigError("split_series: need at least 2 records");
    auto n_train = static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(series.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, series.size() - 1);
    return {Series(series.begin(), series.begin() + static_cast<std::ptrdiff_t>(n_train)),
            Series(series.begin() + static_cast<std::ptrdiff_t>(n_train), series.end())};
}

/// Min-max scaler to [0, 1].
struct Scaler {
    double min = 0.0;
    double max = 1.0;

    double scale(double v) const { return (v - min) / (max - min); }
    double unscale(double v) const { return v * (max - min) + min; }

    friend bool operator==(const Scaler&, const Scaler&) = default;
};

inline Scaler fit_scaler(std::span<const double> train_values) {
    if (train_values.empty()) throw ConfigError("fit_scaler: empty series");
    const auto [lo, hi] = std::minmax_element(train_values.begin(), train_values.end());
    if (!(*hi > *lo)) throw ConfigError("fit_scaler: constant series cannot be scaled");
    return {*lo, *hi};
}

inline std::vector<double> scale(std::span<const double> values, const Scaler& s) {
    std::vector<double> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(), [&](double v) { return s.scale(v); });
    return out;
}

inline std::vector<double> unscale(std::span<const double> values, const Scaler& s) {
    std::vector<double> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(), [&](double v) { return s.unscale(v); });
    return out;
}

// ---------------------------------------------------------------------------
// Windows

/// Scaled values must stay inside this band; test data may overshoot [0, 1] a little.
inline constexpr double kScaledLow = -0.5;
inline constexpr double kScaledHigh = 1.5;

struct WindowedDataset {
    std::size_t window_len = 0;
    std::vector<std::vector<double>> inputs;
    std::vector<double> targets;
    Scaler scaler;

    std::size_t size() const noexcept { return targets.size(); }
    bool empty() const noexcept { return targets.empty(); }
};

/// Rejects scaled values outside [-0.5, 1.5]; `what` names the split in the message.
inline void check_scaled_band(std::span<const double> scaled, std::string_view what) {
    for (std::size_t i = 0; i < scaled.size(); ++i) {
        if (!std::isfinite(scaled[i]) || scaled[i] < kScaledLow || scaled[i] > kScaledHigh)
            throw ConfigError(std::string(what) + ": scaled value " + format_double(scaled[i]) + " at position " +
                              std::to_string(i) + " is outside [-0.5, 1.5]");
    }
}

/// Emits (values[t-W .. t-1] -> values[t]) for every t with a full history.
/// `warmup`, when given, must hold exactly W values immediately preceding `values`.
inline WindowedDataset make_windows(std::span<const double> values, std::size_t window_len,
                                    std::span<const double> warmup = {}, const Scaler& scaler = {}) {
    if (window_len == 0) throw ConfigError("make_windows: window length must be >= 1");
    if (!warmup.empty() && warmup.size() != window_len)
        throw ConfigError("make_windows: warm-up must be empty or exactly " + std::to_string(window_len) +
                          " values, got " + std::to_string(warmup.size()));
    std::vector<double> all(warmup.begin(), warmup.end());
    all.insert(all.end(), values.begin(), values.end());
    if (all.size() < window_len + 1)
        throw ConfigError("make_windows: " + std::to_string(all.size()) + " values cannot form a window of " +
                          std::to_string(window_len) + " plus a target");
    for (double v : all)
        if (!std::isfinite(v)) throw ConfigError("make_windows: non-finite value");
    WindowedDataset ds;
    ds.window_len = window_len;
    ds.scaler = scaler;
    const std::size_t count = all.size() - window_len;
    ds.inputs.reserve(count);
    ds.targets.reserve(count);
    for (std::size_t t = window_len; t < all.size(); ++t) {
        ds.inputs.emplace_back(all.begin() + static_cast<std::ptrdiff_t>(t - window_len),
                               all.begin() + static_cast<std::ptrdiff_t>(t));
        ds.targets.push_back(all[t]);
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Synthetic series

enum class SynthKind { Sine, DoubleSeason, TrendSeason };

inline SynthKind parse_synth_kind(std::string_view name) {
    if (name == "sine" || name == "sine+noise") return SynthKind::Sine;
    if (name == "double-season") return SynthKind::DoubleSeason;
    if (name == "trend+season" || name == "trend") return SynthKind::TrendSeason;
    throw ConfigError("unknown synthetic series kind '" + std::string(name) +
                      "' (expected sine, double-season or trend+season)");
}

inline std::string to_string(SynthKind k) {
    switch (k) {
        case SynthKind::Sine: return "sine";
        case SynthKind::DoubleSeason: return "double-season";
        case SynthKind::TrendSeason: return "trend+season";
    }
    return "?";
}

/// First synthetic timestamp; later points are hourly.
inline Timestamp synth_epoch() {
    using namespace std::chrono;
    return sys_days{year{2017} / January / 1};
}

inline constexpr double kWeeklyAmplitude = 1.5;

/// Noise-free level of the generator at hour t.
inline double synth_level(SynthKind kind, std::size_t t) {
    const double td = static_cast<double>(t);
    double v = 10.0 + 3.0 * std::sin(2.0 * std::numbers::pi * td / 24.0);
    if (kind == SynthKind::DoubleSeason) v += kWeeklyAmplitude * std::sin(2.0 * std::numbers::pi * td / 168.0);
    if (kind == SynthKind::TrendSeason) v += 0.01 * td;
    return v;
}

inline Series synth_series(SynthKind kind, std::size_t n, double noise_sigma, std::uint64_t seed) {
    if (n == 0) throw ConfigError("synth_series: n must be >= 1");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
        throw ConfigError("synth_series: noise sigma must be finite and >= 0");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);
    Series out;
    out.reserve(n);
    const Timestamp start = synth_epoch();
    for (std::size_t t = 0; t < n; ++t) {
        double v = synth_level(kind, t);
        if (noise_sigma > 0.0) v += noise(rng);
        out.push_back({start + std::chrono::hours{static_cast<long>(t)}, v});
    }
    return out;
}

}  // namespace iarn
