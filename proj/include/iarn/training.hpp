#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iarn/data.hpp"
#include "iarn/error.hpp"
#include "iarn/model.hpp"

namespace iarn {

struct TrainConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0005;
    std::size_t epochs = 100;
    std::size_t batch_size = 128;
    std::uint64_t seed = 0;  // shuffle seed

    void validate() const {
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
            throw ConfigError("train: learning rate must be positive");
        if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("train: beta1 must lie in (0, 1)");
        if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("train: beta2 must lie in (0, 1)");
        if (!(epsilon > 0.0)) throw ConfigError("train: epsilon must be positive");
        if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay))
            throw ConfigError("train: weight decay must be >= 0");
        if (epochs == 0) throw ConfigError("train: epochs must be >= 1");
        if (batch_size == 0) throw ConfigError("train: batch size must be >= 1");
    }
};

struct MseResult {
    double loss = 0.0;
    std::vector<double> grad;
};

inline MseResult mse_loss(std::span<const double> preds, std::span<const double> targets) {
    if (preds.empty()) throw DimensionError("mse_loss: empty input");
    if (preds.size() != targets.size()) throw DimensionError("mse_loss: length mismatch");
    const double n = static_cast<double>(preds.size());
    MseResult r;
    r.grad.resize(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double d = preds[i] - targets[i];
        r.loss += d * d;
        r.grad[i] = 2.0 * d / n;
    }
    r.loss /= n;
    return r;
}

struct AdamState {
    IarnParams m;
    IarnParams v;
    std::uint64_t t = 0;

    static AdamState fresh(const IarnParams& p) { return {p.zeros_like(), p.zeros_like(), 0}; }
};

/// Adam update of one parameter array. `decay` is the L2 coefficient folded into the
/// gradient; `step` is the 1-based step number used for bias correction.
inline void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                        std::span<double> v, std::uint64_t step, double decay, const TrainConfig& cfg) {
    if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size())
        throw DimensionError("adam_update: size mismatch");
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i] + decay * params[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = m[i] / c1;
        const double v_hat = v[i] / c2;
        params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
}

/// One Adam step over every parameter array, with L2 weight decay on weights only.
/// Throws NumericError naming the array if any gradient is non-finite; nothing is modified then.
inline void adam_step(IarnParams& params, const IarnParams& grads, AdamState& state, const TrainConfig& cfg) {
    std::vector<ParamView> p_views, m_views, v_views;
    std::vector<ConstParamView> g_views;
    params.for_each([&](const ParamView& v) { p_views.push_back(v); });
    grads.for_each([&](const ConstParamView& v) { g_views.push_back(v); });
    state.m.for_each([&](const ParamView& v) { m_views.push_back(v); });
    state.v.for_each([&](const ParamView& v) { v_views.push_back(v); });
    if (g_views.size() != p_views.size() || m_views.size() != p_views.size() || v_views.size() != p_views.size())
        throw DimensionError("adam_step: gradient or optimizer state does not match parameters");
    for (std::size_t k = 0; k < p_views.size(); ++k) {
        const auto n = p_views[k].data.size();
        if (g_views[k].data.size() != n || m_views[k].data.size() != n || v_views[k].data.size() != n)
            throw DimensionError("adam_step: shape mismatch at " + p_views[k].name);
        for (double g : g_views[k].data) {
            if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient in " + p_views[k].name);
        }
    }
    const std::uint64_t step = state.t + 1;
    for (std::size_t k = 0; k < p_views.size(); ++k) {
        adam_update(p_views[k].data, g_views[k].data, m_views[k].data, v_views[k].data, step,
                    p_views[k].decay ? cfg.weight_decay : 0.0, cfg);
    }
    state.t = step;
}

/// Mini-batch order for every epoch: a fresh seeded permutation cut into batches of
/// `batch_size`, the last batch possibly shorter.
class BatchSchedule {
public:
    BatchSchedule(std::size_t samples, std::size_t batch_size, std::uint64_t seed)
        : order_(samples), batch_size_(batch_size), rng_(seed) {
        if (batch_size == 0) throw ConfigError("BatchSchedule: batch size must be >= 1");
        std::iota(order_.begin(), order_.end(), std::size_t{0});
    }

    std::vector<std::vector<std::size_t>> next_epoch() {
        std::shuffle(order_.begin(), order_.end(), rng_);
        std::vector<std::vector<std::size_t>> batches;
        for (std::size_t begin = 0; begin < order_.size(); begin += batch_size_) {
            const std::size_t end = std::min(order_.size(), begin + batch_size_);
            batches.emplace_back(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                                 order_.begin() + static_cast<std::ptrdiff_t>(end));
        }
        return batches;
    }

private:
    std::vector<std::size_t> order_;
    std::size_t batch_size_;
    std::mt19937_64 rng_;
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<std::optional<double>> val_loss;
    std::vector<double> seconds;

    std::size_t epochs() const noexcept { return train_loss.size(); }
};

inline void write_history_csv(std::ostream& out, const TrainHistory& h) {
    out << "epoch,train_loss,val_loss,seconds\n";
    for (std::size_t e = 0; e < h.epochs(); ++e) {
        out << (e + 1) << ',' << format_double(h.train_loss[e]) << ',';
        if (h.val_loss[e]) out << format_double(*h.val_loss[e]);
        out << ',' << format_double(h.seconds[e]) << '\n';
    }
}

/// Mean squared error of the model over a dataset (no gradients).
inline double dataset_loss(const IarnParams& params, const WindowedDataset& ds) {
    if (ds.empty()) throw ConfigError("dataset_loss: empty dataset");
    double acc = 0.0;
    ForwardCache cache;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double d = iarn_forward(ds.inputs[i], params, cache) - ds.targets[i];
        acc += d * d;
    }
    return acc / static_cast<double>(ds.size());
}

/// Per-epoch progress callback: (epoch index from 1, train loss, validation loss).
using EpochCallback = std::function<void(std::size_t, double, std::optional<double>)>;

struct TrainResult {
    IarnParams params;
    TrainHistory history;
};

/// Mini-batch Adam training on MSE. Sample order is reshuffled every epoch from
/// `tcfg.seed`; batch gradients are means accumulated in sample order, so a run is
/// reproducible bit for bit. The train loss recorded per epoch is the mean of the
/// per-batch losses weighted by batch size, measured before each update.
inline TrainResult train(const WindowedDataset& dataset, const ModelConfig& mcfg, const TrainConfig& tcfg,
                         const WindowedDataset* validation = nullptr, const EpochCallback& on_epoch = {},
                         std::optional<IarnParams> initial = std::nullopt) {
    mcfg.validate();
    tcfg.validate();
    if (dataset.empty()) throw ConfigError("train: empty dataset");
    if (dataset.window_len != mcfg.window_len)
        throw ConfigError("train: dataset window length " + std::to_string(dataset.window_len) +
                          " != model window length " + std::to_string(mcfg.window_len));

    TrainResult result{initial ? std::move(*initial) : init_params(mcfg), {}};
    IarnParams& params = result.params;
    if (!params.matches(mcfg)) throw ConfigError("train: initial parameters do not match the model config");
    AdamState state = AdamState::fresh(params);
    BatchSchedule schedule(dataset.size(), tcfg.batch_size, tcfg.seed);
    ForwardCache cache;

    for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        double epoch_loss = 0.0;
        const auto batches = schedule.next_epoch();
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const double n = static_cast<double>(batches[b].size());
            IarnParams grad = params.zeros_like();
            double batch_loss = 0.0;
            for (const std::size_t s : batches[b]) {
                const double d = iarn_forward(dataset.inputs[s], params, cache) - dataset.targets[s];
                batch_loss += d * d;
                grad += iarn_backward(2.0 * d / n, cache, params);
            }
            if (!std::isfinite(batch_loss))
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                                   std::to_string(b + 1));
            epoch_loss += batch_loss;
            adam_step(params, grad, state, tcfg);
        }
        epoch_loss /= static_cast<double>(dataset.size());
        std::optional<double> val;
        if (validation && !validation->empty()) val = dataset_loss(params, *validation);
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
        result.history.train_loss.push_back(epoch_loss);
        result.history.val_loss.push_back(val);
        result.history.seconds.push_back(elapsed.count());
        if (on_epoch) on_epoch(epoch + 1, epoch_loss, val);
    }
    return result;
}

}  // namespace iarn
