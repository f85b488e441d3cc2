#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "iarn/data.hpp"
#include "iarn/error.hpp"

namespace iarn {

struct MetricsReport {
    double rmse = 0.0;
    double mae = 0.0;
    double mape_percent = 0.0;
    double evs = 0.0;
    double rmse_normalized = 0.0;  // rmse / mean(actual)
    double mae_normalized = 0.0;   // mae / mean(actual)
    std::size_t n = 0;
};

namespace detail {

inline double population_variance(std::span<const double> v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return acc / static_cast<double>(v.size());
}

}  // namespace detail

/// RMSE, MAE, MAPE (percent) and explained variance, plus RMSE and MAE divided by
/// the mean of `actual`. Variances are population variances.
inline MetricsReport evaluate(std::span<const double> actual, std::span<const double> predicted) {
    if (actual.empty()) throw DimensionError("evaluate: empty input");
    if (actual.size() != predicted.size())
        throw DimensionError("evaluate: " + std::to_string(actual.size()) + " actual vs " +
                             std::to_string(predicted.size()) + " predicted values");
    const std::size_t n = actual.size();
    const double nd = static_cast<double>(n);
    std::vector<double> errors(n);
    double sq = 0.0, abs_sum = 0.0, pct = 0.0, mean_actual = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (actual[i] == 0.0)
            throw NumericError("evaluate: MAPE undefined, actual value at index " + std::to_string(i) + " is zero");
        const double e = actual[i] - predicted[i];
        errors[i] = e;
        sq += e * e;
        abs_sum += std::abs(e);
        pct += std::abs(e / actual[i]);
        mean_actual += actual[i];
    }
    mean_actual /= nd;
    const double var_actual = detail::population_variance(actual);
    if (!(var_actual > 0.0)) throw NumericError("evaluate: EVS undefined, actual series has zero variance");
    if (mean_actual == 0.0) throw NumericError("evaluate: normalization undefined, mean of actual is zero");

    MetricsReport r;
    r.n = n;
    r.rmse = std::sqrt(sq / nd);
    r.mae = abs_sum / nd;
    r.mape_percent = pct * 100.0 / nd;
    r.evs = 1.0 - detail::population_variance(errors) / var_actual;
    r.rmse_normalized = r.rmse / mean_actual;
    r.mae_normalized = r.mae / mean_actual;
    return r;
}

inline std::string metrics_csv_header() { return "RMSE,MAE,MAPE(%),EVS"; }

/// One row in table order, using the normalized RMSE and MAE.
inline std::string metrics_csv_row(const MetricsReport& r) {
    return format_double(r.rmse_normalized) + "," + format_double(r.mae_normalized) + "," +
           format_double(r.mape_percent) + "," + format_double(r.evs);
}

}  // namespace iarn
