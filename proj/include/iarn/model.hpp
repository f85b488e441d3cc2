#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "iarn/error.hpp"
#include "iarn/layers.hpp"
#include "iarn/tensor.hpp"

namespace iarn {

struct ModelConfig {
    std::size_t window_len = 30;
    std::size_t hidden_channels = 32;
    std::size_t kernel_size = 3;
    std::size_t num_blocks = 5;
    std::uint64_t seed = 0;

    void validate() const {
        if (window_len == 0) throw ConfigError("model: window_len must be >= 1");
        if (hidden_channels == 0) throw ConfigError("model: hidden_channels must be >= 1");
        if (num_blocks == 0) throw ConfigError("model: num_blocks must be >= 1");
        if (kernel_size == 0 || kernel_size % 2 == 0)
            throw ConfigError("model: kernel_size must be odd, got " + std::to_string(kernel_size));
    }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ResidualBlockParams {
    ConvParams conv1;
    ConvParams conv2;
    std::optional<ConvParams> shortcut;  // 1x1 projection; absent means identity

    ResidualBlockParams zeros_like() const {
        ResidualBlockParams z{conv1.zeros_like(), conv2.zeros_like(), std::nullopt};
        if (shortcut) z.shortcut = shortcut->zeros_like();
        return z;
    }

    friend bool operator==(const ResidualBlockParams&, const ResidualBlockParams&) = default;
};

/// Visitor target for a named parameter array. `decay` is false for biases.
struct ParamView {
    std::string name;
    std::vector<std::size_t> shape;
    std::span<double> data;
    bool decay;
};

struct ConstParamView {
    std::string name;
    std::vector<std::size_t> shape;
    std::span<const double> data;
    bool decay;
};

/// Complete learnable parameter set. The same type doubles as gradient bundle
/// and as Adam moment storage.
struct IarnParams {
    ConvParams attention;
    std::vector<ResidualBlockParams> blocks;
    ConvParams head_conv;
    std::vector<double> head_weights;
    double head_bias = 0.0;

    /// All-zero parameters with the architecture implied by `cfg`.
    static IarnParams zeros(const ModelConfig& cfg) {
        cfg.validate();
        IarnParams p;
        const std::size_t h = cfg.hidden_channels;
        const std::size_t k = cfg.kernel_size;
        p.attention = ConvParams(1, 1, k);
        for (std::size_t b = 0; b < cfg.num_blocks; ++b) {
            const std::size_t in = b == 0 ? 1 : h;
            ResidualBlockParams bp{ConvParams(h, in, k), ConvParams(h, h, k), std::nullopt};
            if (in != h) bp.shortcut = ConvParams(h, in, 1);
            p.blocks.push_back(std::move(bp));
        }
        p.head_conv = ConvParams(1, h, 1);
        p.head_weights.assign(cfg.window_len, 0.0);
        return p;
    }

    IarnParams zeros_like() const {
        IarnParams z;
        z.attention = attention.zeros_like();
        for (const auto& b : blocks) z.blocks.push_back(b.zeros_like());
        z.head_conv = head_conv.zeros_like();
        z.head_weights.assign(head_weights.size(), 0.0);
        return z;
    }

    template <class F>
    void for_each(F&& f) {
        visit_conv("attention", attention, f);
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            const std::string prefix = "blocks." + std::to_string(b) + ".";
            visit_conv(prefix + "conv1", blocks[b].conv1, f);
            visit_conv(prefix + "conv2", blocks[b].conv2, f);
            if (blocks[b].shortcut) visit_conv(prefix + "shortcut", *blocks[b].shortcut, f);
        }
        visit_conv("head_conv", head_conv, f);
        f(ParamView{"head_affine.weight", {head_weights.size()}, head_weights, true});
        f(ParamView{"head_affine.bias", {1}, std::span<double>(&head_bias, 1), false});
    }

    template <class F>
    void for_each(F&& f) const {
        const_cast<IarnParams*>(this)->for_each([&](const ParamView& v) {
            f(ConstParamView{v.name, v.shape, std::span<const double>(v.data), v.decay});
        });
    }

    std::size_t count() const {
        std::size_t n = 0;
        for_each([&](const ConstParamView& v) { n += v.data.size(); });
        return n;
    }

    std::vector<double> flatten() const {
        std::vector<double> flat;
        flat.reserve(count());
        for_each([&](const ConstParamView& v) { flat.insert(flat.end(), v.data.begin(), v.data.end()); });
        return flat;
    }

    void assign_flat(std::span<const double> flat) {
        if (flat.size() != count()) throw DimensionError("IarnParams::assign_flat: size mismatch");
        std::size_t pos = 0;
        for_each([&](const ParamView& v) {
            std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
                      flat.begin() + static_cast<std::ptrdiff_t>(pos + v.data.size()), v.data.begin());
            pos += v.data.size();
        });
    }

    /// Element-wise this += other; shapes must agree.
    IarnParams& operator+=(const IarnParams& other) {
        std::vector<std::span<const double>> src;
        other.for_each([&](const ConstParamView& v) { src.push_back(v.data); });
        std::size_t idx = 0;
        for_each([&](const ParamView& v) {
            if (idx >= src.size() || src[idx].size() != v.data.size())
                throw DimensionError("IarnParams +=: bundle shape mismatch at " + v.name);
            for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] += src[idx][i];
            ++idx;
        });
        if (idx != src.size()) throw DimensionError("IarnParams +=: bundle shape mismatch");
        return *this;
    }

    IarnParams& operator*=(double s) {
        for_each([&](const ParamView& v) {
            for (double& x : v.data) x *= s;
        });
        return *this;
    }

    /// True when `cfg` produces exactly this architecture.
    bool matches(const ModelConfig& cfg) const {
        const IarnParams ref = zeros(cfg);
        std::vector<std::vector<std::size_t>> a, b;
        for_each([&](const ConstParamView& v) { a.push_back(v.shape); });
        ref.for_each([&](const ConstParamView& v) { b.push_back(v.shape); });
        return a == b;
    }

    friend bool operator==(const IarnParams&, const IarnParams&) = default;

private:
    template <class F>
    static void visit_conv(const std::string& name, ConvParams& c, F& f) {
        f(ParamView{name + ".weight", {c.out_channels, c.in_channels, c.kernel_size}, c.weights, true});
        f(ParamView{name + ".bias", {c.out_channels}, c.bias, false});
    }
};

namespace detail {

inline void init_uniform(std::vector<double>& w, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : w) x = dist(rng);
}

}  // namespace detail

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases. Deterministic per seed.
inline IarnParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    IarnParams p = IarnParams::zeros(cfg);
    std::mt19937_64 rng(seed);
    auto init_conv = [&](ConvParams& c) {
        const double fan_in = static_cast<double>(c.in_channels * c.kernel_size);
        detail::init_uniform(c.weights, 1.0 / std::sqrt(fan_in), rng);
    };
    init_conv(p.attention);
    for (auto& b : p.blocks) {
        init_conv(b.conv1);
        init_conv(b.conv2);
        if (b.shortcut) init_conv(*b.shortcut);
    }
    init_conv(p.head_conv);
    detail::init_uniform(p.head_weights, 1.0 / std::sqrt(static_cast<double>(cfg.window_len)), rng);
    return p;
}

inline IarnParams init_params(const ModelConfig& cfg) { return init_params(cfg, cfg.seed); }

// ---------------------------------------------------------------------------
// Attention block: E = softmax_length(relu(conv(A))) * A + A

struct AttentionCache {
    TensorCL input;
    TensorCL conv_out;
    TensorCL attention_map;
};

inline TensorCL attention_forward(const TensorCL& a, const ConvParams& p, AttentionCache& cache) {
    if (a.channels() != p.in_channels || p.in_channels != p.out_channels)
        throw DimensionError("attention_forward: input has " + std::to_string(a.channels()) +
                             " channels, attention conv is " + std::to_string(p.in_channels) + "->" +
                             std::to_string(p.out_channels));
    cache.input = a;
    cache.conv_out = conv1d_forward(a, p);
    cache.attention_map = softmax_length_forward(relu_forward(cache.conv_out));
    TensorCL e(a.channels(), a.length());
    auto ev = e.values();
    auto av = a.values();
    auto sv = cache.attention_map.values();
    for (std::size_t i = 0; i < ev.size(); ++i) ev[i] = sv[i] * av[i] + av[i];
    return e;
}

inline TensorCL attention_forward(const TensorCL& a, const ConvParams& p) {
    AttentionCache cache;
    return attention_forward(a, p, cache);
}

struct AttentionBackward {
    TensorCL grad_input;
    ConvParams grad_params;
};

inline AttentionBackward attention_backward(const TensorCL& grad_e, const AttentionCache& cache, const ConvParams& p) {
    if (!grad_e.same_shape(cache.input)) throw DimensionError("attention_backward: grad shape mismatch");
    const auto av = cache.input.values();
    const auto sv = cache.attention_map.values();
    const auto gv = grad_e.values();
    TensorCL grad_a(grad_e.channels(), grad_e.length());
    TensorCL grad_s(grad_e.channels(), grad_e.length());
    auto gav = grad_a.values();
    auto gsv = grad_s.values();
    for (std::size_t i = 0; i < gv.size(); ++i) {
        gav[i] = gv[i] * (sv[i] + 1.0);
        gsv[i] = gv[i] * av[i];
    }
    const TensorCL grad_y = relu_backward(softmax_length_backward(grad_s, cache.attention_map), cache.conv_out);
    ConvBackward cb = conv1d_backward(grad_y, cache.input, p);
    grad_a += cb.grad_input;
    return {std::move(grad_a), std::move(cb.grad_params)};
}

// ---------------------------------------------------------------------------
// Residual block: o = relu(conv2(relu(conv1(x))) + shortcut(x))

struct ResidualCache {
    TensorCL input;
    TensorCL conv1_out;
    TensorCL hidden;  // relu(conv1_out)
    TensorCL sum;     // F(x) + shortcut(x)
};

inline TensorCL residual_block_forward(const TensorCL& x, const ResidualBlockParams& bp, ResidualCache& cache) {
    if (x.channels() != bp.conv1.in_channels)
        throw DimensionError("residual_block_forward: input has " + std::to_string(x.channels()) +
                             " channels, block expects " + std::to_string(bp.conv1.in_channels));
    if (bp.conv2.in_channels != bp.conv1.out_channels)
        throw DimensionError("residual_block_forward: conv2 input does not match conv1 output");
    if (!bp.shortcut && bp.conv2.out_channels != x.channels())
        throw DimensionError("residual_block_forward: identity shortcut needs matching channel counts");
    cache.input = x;
    cache.conv1_out = conv1d_forward(x, bp.conv1);
    cache.hidden = relu_forward(cache.conv1_out);
    cache.sum = conv1d_forward(cache.hidden, bp.conv2);
    if (bp.shortcut) {
        const TensorCL proj = conv1d_forward(x, *bp.shortcut);
        if (!proj.same_shape(cache.sum)) throw DimensionError("residual_block_forward: shortcut shape mismatch");
        cache.sum += proj;
    } else {
        cache.sum += x;
    }
    return relu_forward(cache.sum);
}

inline TensorCL residual_block_forward(const TensorCL& x, const ResidualBlockParams& bp) {
    ResidualCache cache;
    return residual_block_forward(x, bp, cache);
}

struct ResidualBackward {
    TensorCL grad_input;
    ResidualBlockParams grad_params;
};

inline ResidualBackward residual_block_backward(const TensorCL& grad_o, const ResidualCache& cache,
                                                const ResidualBlockParams& bp) {
    if (!grad_o.same_shape(cache.sum)) throw DimensionError("residual_block_backward: grad shape mismatch");
    const TensorCL grad_sum = relu_backward(grad_o, cache.sum);
    ConvBackward c2 = conv1d_backward(grad_sum, cache.hidden, bp.conv2);
    ConvBackward c1 = conv1d_backward(relu_backward(c2.grad_input, cache.conv1_out), cache.input, bp.conv1);
    ResidualBackward r{std::move(c1.grad_input), {std::move(c1.grad_params), std::move(c2.grad_params), std::nullopt}};
    if (bp.shortcut) {
        ConvBackward cs = conv1d_backward(grad_sum, cache.input, *bp.shortcut);
        r.grad_input += cs.grad_input;
        r.grad_params.shortcut = std::move(cs.grad_params);
    } else {
        r.grad_input += grad_sum;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Whole network

struct ForwardCache {
    const IarnParams* params = nullptr;
    AttentionCache attention;
    std::vector<ResidualCache> blocks;
    TensorCL head_input;     // output of the last residual block
    TensorCL head_features;  // 1 x W output of head_conv
};

inline double iarn_forward(std::span<const double> window, const IarnParams& params, ForwardCache& cache) {
    if (window.size() != params.head_weights.size())
        throw DimensionError("iarn_forward: window has " + std::to_string(window.size()) + " values, model expects " +
                             std::to_string(params.head_weights.size()));
    cache.params = &params;
    TensorCL x = attention_forward(TensorCL::row(window), params.attention, cache.attention);
    cache.blocks.resize(params.blocks.size());
    for (std::size_t b = 0; b < params.blocks.size(); ++b)
        x = residual_block_forward(x, params.blocks[b], cache.blocks[b]);
    cache.head_input = std::move(x);
    cache.head_features = conv1d_forward(cache.head_input, params.head_conv);
    const double pred = affine_forward(cache.head_features.values(), params.head_weights, params.head_bias);
    if (!std::isfinite(pred)) throw NumericError("iarn_forward: non-finite prediction");
    return pred;
}

inline double iarn_forward(std::span<const double> window, const IarnParams& params) {
    ForwardCache cache;
    return iarn_forward(window, params, cache);
}

/// Gradients of `grad_pred * prediction` w.r.t. every parameter. The cache must come
/// from iarn_forward with the same `params` object.
inline IarnParams iarn_backward(double grad_pred, const ForwardCache& cache, const IarnParams& params) {
    if (cache.params != &params || cache.blocks.size() != params.blocks.size() || cache.head_features.empty())
        throw ContractError("iarn_backward: cache was not produced by a forward pass with these parameters");
    IarnParams g;
    const AffineBackward ab = affine_backward(grad_pred, cache.head_features.values(), params.head_weights);
    g.head_weights = ab.grad_weights;
    g.head_bias = ab.grad_bias;
    ConvBackward hc = conv1d_backward(TensorCL(1, ab.grad_input.size(), ab.grad_input), cache.head_input,
                                      params.head_conv);
    g.head_conv = std::move(hc.grad_params);
    TensorCL grad = std::move(hc.grad_input);
    g.blocks.resize(params.blocks.size());
    for (std::size_t b = params.blocks.size(); b-- > 0;) {
        ResidualBackward rb = residual_block_backward(grad, cache.blocks[b], params.blocks[b]);
        g.blocks[b] = std::move(rb.grad_params);
        grad = std::move(rb.grad_input);
    }
    AttentionBackward at = attention_backward(grad, cache.attention, params.attention);
    g.attention = std::move(at.grad_params);
    return g;
}

}  // namespace iarn
