#pragma once

// End-to-end helpers shared by the CLI and the test suites.

#include <cstddef>
#include <span>
#include <vector>

#include "iarn/data.hpp"
#include "iarn/error.hpp"
#include "iarn/metrics.hpp"
#include "iarn/model.hpp"

namespace iarn {

struct PreparedData {
    Scaler scaler;
    WindowedDataset train;
    WindowedDataset test;             // test targets with warm-up from the tail of train
    std::vector<Timestamp> test_times;  // one per test target
};

/// Splits, scales, and windows a series. The scaler is fit on the training split unless
/// `fixed_scaler` is supplied (e.g. when evaluating an existing model).
inline PreparedData prepare_data(std::span<const SeriesRecord> series, std::size_t window_len, double train_fraction,
                                 const Scaler* fixed_scaler = nullptr) {
    const SeriesSplit split = split_series(series, train_fraction);
    const std::vector<double> train_raw = values_of(split.train);
    PreparedData out;
    out.scaler = fixed_scaler ? *fixed_scaler : fit_scaler(train_raw);
    const std::vector<double> train_scaled = scale(train_raw, out.scaler);
    const std::vector<double> test_scaled = scale(values_of(split.test), out.scaler);
    check_scaled_band(train_scaled, "training split");
    check_scaled_band(test_scaled, "test split");
    if (train_scaled.size() < window_len)
        throw ConfigError("training split has " + std::to_string(train_scaled.size()) +
                          " values, fewer than the window length " + std::to_string(window_len));
    if (train_scaled.size() > window_len) out.train = make_windows(train_scaled, window_len, {}, out.scaler);
    else out.train.window_len = window_len;
    const std::span<const double> warmup(train_scaled.data() + (train_scaled.size() - window_len), window_len);
    out.test = make_windows(test_scaled, window_len, warmup, out.scaler);
    for (const auto& r : split.test) out.test_times.push_back(r.timestamp);
    return out;
}

/// Next `steps` scaled values, each prediction fed back as the newest input.
inline std::vector<double> predict_recursive(const IarnParams& params, std::span<const double> window,
                                             std::size_t steps) {
    std::vector<double> buf(window.begin(), window.end());
    std::vector<double> out;
    out.reserve(steps);
    ForwardCache cache;
    for (std::size_t s = 0; s < steps; ++s) {
        const double next = iarn_forward(std::span<const double>(buf).last(window.size()), params, cache);
        out.push_back(next);
        buf.push_back(next);
    }
    return out;
}

/// One-step-ahead predictions for every sample, in scaled units.
inline std::vector<double> predict_dataset(const IarnParams& params, const WindowedDataset& ds) {
    std::vector<double> out;
    out.reserve(ds.size());
    ForwardCache cache;
    for (const auto& w : ds.inputs) out.push_back(iarn_forward(w, params, cache));
    return out;
}

struct Evaluation {
    std::vector<double> actual;     // original units
    std::vector<double> predicted;  // original units
    MetricsReport report;
};

inline Evaluation evaluate_dataset(const IarnParams& params, const WindowedDataset& ds, const Scaler& scaler) {
    Evaluation e;
    e.actual = unscale(ds.targets, scaler);
    e.predicted = unscale(predict_dataset(params, ds), scaler);
    e.report = evaluate(e.actual, e.predicted);
    return e;
}

}  // namespace iarn
