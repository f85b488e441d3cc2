#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "iarn/error.hpp"

namespace iarn {

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

/// Central-difference gradient check.
///
/// `value(params)` returns the scalar objective; `gradient(params)` returns the
/// analytic gradient with one entry per parameter. The error of entry i is
/// |analytic - numeric| / max(1, |analytic|, |numeric|); the maximum is reported.
template <class ValueFn, class GradFn>
GradCheckResult grad_check_detailed(ValueFn&& value, GradFn&& gradient, std::span<const double> params,
                                    double eps) {
    if (!(eps > 0.0)) throw ConfigError("grad_check: eps must be positive");
    std::vector<double> x(params.begin(), params.end());
    const std::vector<double> analytic = gradient(std::span<const double>(x));
    if (analytic.size() != x.size())
        throw DimensionError("grad_check: gradient has " + std::to_string(analytic.size()) + " entries for " +
                             std::to_string(x.size()) + " parameters");

    auto eval = [&](std::size_t i) {
        const double f = value(std::span<const double>(x));
        if (!std::isfinite(f)) throw NumericError("grad_check: non-finite objective at parameter " + std::to_string(i));
        return f;
    };

    GradCheckResult r;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + eps;
        const double up = eval(i);
        x[i] = orig - eps;
        const double down = eval(i);
        x[i] = orig;
        const double numeric = (up - down) / (2.0 * eps);
        const double a = analytic[i];
        const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
        if (i == 0 || err > r.max_relative_error) r = {err, i, a, numeric};
    }
    return r;
}

template <class ValueFn, class GradFn>
double grad_check(ValueFn&& value, GradFn&& gradient, std::span<const double> params, double eps) {
    return grad_check_detailed(value, gradient, params, eps).max_relative_error;
}

}  // namespace iarn
