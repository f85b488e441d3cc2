#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "iarn/grad_check.hpp"
#include "iarn/model.hpp"
#include "iarn/training.hpp"

namespace iarn {

/// A small randomized regression problem for checking whole-network gradients.
struct NetworkCheckCase {
    ModelConfig config;
    IarnParams params;
    std::vector<std::vector<double>> windows;
    std::vector<double> targets;
};

/// Random parameters (biases included) and a batch of windows in [0, 1].
inline NetworkCheckCase make_network_check_case(std::uint64_t seed, std::size_t window_len = 6,
                                                std::size_t hidden = 2, std::size_t kernel = 3,
                                                std::size_t blocks = 2, std::size_t samples = 3) {
    NetworkCheckCase c;
    c.config = {window_len, hidden, kernel, blocks, seed};
    c.params = init_params(c.config, seed);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> bias(-0.2, 0.2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    c.params.for_each([&](const ParamView& v) {
        if (!v.decay) {
            for (double& b : v.data) b = bias(rng);
        }
    });
    for (std::size_t s = 0; s < samples; ++s) {
        std::vector<double> w(window_len);
        for (double& x : w) x = unit(rng);
        c.windows.push_back(std::move(w));
        c.targets.push_back(unit(rng));
    }
    return c;
}

/// Batch MSE of the network at flat parameter vector `flat`.
inline double network_loss(const NetworkCheckCase& c, std::span<const double> flat) {
    IarnParams p = c.params;
    p.assign_flat(flat);
    std::vector<double> preds;
    for (const auto& w : c.windows) preds.push_back(iarn_forward(w, p));
    return mse_loss(preds, c.targets).loss;
}

/// Analytic gradient of network_loss via the backward pass.
inline std::vector<double> network_loss_gradient(const NetworkCheckCase& c, std::span<const double> flat) {
    IarnParams p = c.params;
    p.assign_flat(flat);
    std::vector<double> preds;
    std::vector<ForwardCache> caches(c.windows.size());
    for (std::size_t s = 0; s < c.windows.size(); ++s) preds.push_back(iarn_forward(c.windows[s], p, caches[s]));
    const MseResult loss = mse_loss(preds, c.targets);
    IarnParams total = p.zeros_like();
    for (std::size_t s = 0; s < c.windows.size(); ++s) total += iarn_backward(loss.grad[s], caches[s], p);
    return total.flatten();
}

inline GradCheckResult check_network_gradients(const NetworkCheckCase& c, double eps = 1e-5) {
    const std::vector<double> flat = c.params.flatten();
    return grad_check_detailed([&](std::span<const double> x) { return network_loss(c, x); },
                               [&](std::span<const double> x) { return network_loss_gradient(c, x); }, flat, eps);
}

}  // namespace iarn
