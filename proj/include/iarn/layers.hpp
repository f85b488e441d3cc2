#pragma once

// Forward and backward kernels for the layer primitives used by the network.
// Every function is pure: caches are passed back in explicitly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "iarn/error.hpp"
#include "iarn/tensor.hpp"

namespace iarn {

/// Weights and bias of a 1D convolution. Weights are laid out [out][in][k].
/// Also used as its own gradient bundle.
struct ConvParams {
    std::size_t out_channels = 0;
    std::size_t in_channels = 0;
    std::size_t kernel_size = 0;
    std::vector<double> weights;
    std::vector<double> bias;

    ConvParams() = default;

    ConvParams(std::size_t out, std::size_t in, std::size_t k)
        : out_channels(out), in_channels(in), kernel_size(k), weights(out * in * k, 0.0), bias(out, 0.0) {
        validate();
    }

    ConvParams(std::size_t out, std::size_t in, std::size_t k, std::vector<double> w, std::vector<double> b)
        : out_channels(out), in_channels(in), kernel_size(k), weights(std::move(w)), bias(std::move(b)) {
        validate();
    }

    void validate() const {
        if (out_channels == 0 || in_channels == 0) throw ConfigError("conv: channel counts must be positive");
        if (kernel_size == 0 || kernel_size % 2 == 0)
            throw ConfigError("conv: kernel size must be odd, got " + std::to_string(kernel_size));
        if (weights.size() != out_channels * in_channels * kernel_size)
            throw DimensionError("conv: weight array has " + std::to_string(weights.size()) + " entries, expected " +
                                 std::to_string(out_channels * in_channels * kernel_size));
        if (bias.size() != out_channels)
            throw DimensionError("conv: bias array has " + std::to_string(bias.size()) + " entries, expected " +
                                 std::to_string(out_channels));
    }

    double& weight(std::size_t o, std::size_t i, std::size_t j) {
        return weights[(o * in_channels + i) * kernel_size + j];
    }
    double weight(std::size_t o, std::size_t i, std::size_t j) const {
        return weights[(o * in_channels + i) * kernel_size + j];
    }

    /// Zero-valued bundle of the same shape.
    ConvParams zeros_like() const { return ConvParams(out_channels, in_channels, kernel_size); }

    bool same_shape(const ConvParams& o) const noexcept {
        return out_channels == o.out_channels && in_channels == o.in_channels && kernel_size == o.kernel_size;
    }

    friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

// Eigen picks vectorized or scalar code per element based on the runtime address of
// mapped storage, which changes rounding. Products only ever see Eigen-owned (aligned)
// matrices so results depend on shapes and values alone.
inline RowMatrix aligned_copy(const double* data, Eigen::Index rows, Eigen::Index cols) {
    return ConstMatrixMap(data, rows, cols);
}

// Valid range of output positions t for tap offset `shift` such that 0 <= t + shift < length.
inline std::pair<std::size_t, std::size_t> tap_range(std::ptrdiff_t shift, std::size_t length) {
    const auto len = static_cast<std::ptrdiff_t>(length);
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(len, len - shift);
    if (hi <= lo) return {0, 0};
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// Unfolds the zero-padded input into rows (i * k + j), columns t:
// col[i * k + j][t] = input[i][t + j - pad].
inline RowMatrix im2col(const TensorCL& input, std::size_t k) {
    const std::size_t len = input.length();
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    RowMatrix col = RowMatrix::Zero(static_cast<Eigen::Index>(input.channels() * k), static_cast<Eigen::Index>(len));
    for (std::size_t i = 0; i < input.channels(); ++i) {
        const double* src = input.channel(i).data();
        for (std::size_t j = 0; j < k; ++j) {
            const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
            const auto [lo, hi] = tap_range(shift, len);
            double* dst = col.row(static_cast<Eigen::Index>(i * k + j)).data();
            for (std::size_t t = lo; t < hi; ++t) dst[t] = src[static_cast<std::ptrdiff_t>(t) + shift];
        }
    }
    return col;
}

}  // namespace detail

/// Same-length cross-correlation with symmetric zero padding of (k-1)/2, plus bias.
inline TensorCL conv1d_forward(const TensorCL& input, const ConvParams& p) {
    if (p.kernel_size % 2 == 0) throw ConfigError("conv1d_forward: kernel size must be odd");
    if (input.channels() != p.in_channels)
        throw DimensionError("conv1d_forward: input has " + std::to_string(input.channels()) +
                             " channels, kernel expects " + std::to_string(p.in_channels));
    const auto len = static_cast<Eigen::Index>(input.length());
    const auto out_c = static_cast<Eigen::Index>(p.out_channels);
    const auto taps = static_cast<Eigen::Index>(p.in_channels * p.kernel_size);
    const detail::RowMatrix w = detail::aligned_copy(p.weights.data(), out_c, taps);
    detail::RowMatrix o = p.kernel_size == 1
                              ? detail::RowMatrix(w * detail::aligned_copy(input.values().data(), taps, len))
                              : detail::RowMatrix(w * detail::im2col(input, p.kernel_size));
    for (Eigen::Index r = 0; r < out_c; ++r) o.row(r).array() += p.bias[static_cast<std::size_t>(r)];
    TensorCL out(p.out_channels, input.length());
    detail::MatrixMap(out.values().data(), out_c, len) = o;
    return out;
}

struct ConvBackward {
    TensorCL grad_input;
    ConvParams grad_params;
};

inline ConvBackward conv1d_backward(const TensorCL& grad_out, const TensorCL& cached_input, const ConvParams& p) {
    if (cached_input.channels() != p.in_channels)
        throw DimensionError("conv1d_backward: cached input channel mismatch");
    if (grad_out.channels() != p.out_channels || grad_out.length() != cached_input.length())
        throw DimensionError("conv1d_backward: grad_out is " + shape_str(grad_out) + ", expected " +
                             std::to_string(p.out_channels) + "x" + std::to_string(cached_input.length()));
    const std::size_t len = cached_input.length();
    const auto len_i = static_cast<Eigen::Index>(len);
    const auto out_c = static_cast<Eigen::Index>(p.out_channels);
    const std::size_t k = p.kernel_size;
    const auto taps = static_cast<Eigen::Index>(p.in_channels * k);
    ConvBackward r{TensorCL(p.in_channels, len), p.zeros_like()};
    const detail::RowMatrix g = detail::aligned_copy(grad_out.values().data(), out_c, len_i);
    const detail::RowMatrix w = detail::aligned_copy(p.weights.data(), out_c, taps);
    for (Eigen::Index o = 0; o < out_c; ++o) r.grad_params.bias[static_cast<std::size_t>(o)] = g.row(o).sum();
    const detail::RowMatrix col =
        k == 1 ? detail::aligned_copy(cached_input.values().data(), taps, len_i) : detail::im2col(cached_input, k);
    const detail::RowMatrix gw = g * col.transpose();
    detail::MatrixMap(r.grad_params.weights.data(), out_c, taps) = gw;
    const detail::RowMatrix gcol = w.transpose() * g;
    if (k == 1) {
        detail::MatrixMap(r.grad_input.values().data(), taps, len_i) = gcol;
        return r;
    }
    const auto pad = static_cast<std::ptrdiff_t>(k / 2);
    for (std::size_t i = 0; i < p.in_channels; ++i) {
        double* dst = r.grad_input.channel(i).data();
        for (std::size_t j = 0; j < k; ++j) {
            const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
            const auto [lo, hi] = detail::tap_range(shift, len);
            const double* src = gcol.row(static_cast<Eigen::Index>(i * k + j)).data();
            for (std::size_t t = lo; t < hi; ++t) dst[static_cast<std::ptrdiff_t>(t) + shift] += src[t];
        }
    }
    return r;
}

inline TensorCL relu_forward(const TensorCL& x) {
    TensorCL out = x;
    for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
    return out;
}

/// Gradient passes where the cached input was strictly positive.
inline TensorCL relu_backward(const TensorCL& grad_out, const TensorCL& cached_x) {
    if (!grad_out.same_shape(cached_x)) throw DimensionError("relu_backward: shape mismatch");
    TensorCL g = grad_out;
    auto gv = g.values();
    auto xv = cached_x.values();
    for (std::size_t i = 0; i < gv.size(); ++i) {
        if (!(xv[i] > 0.0)) gv[i] = 0.0;
    }
    return g;
}

/// Softmax over the length axis, independently for every channel.
inline TensorCL softmax_length_forward(const TensorCL& x) {
    TensorCL out(x.channels(), x.length());
    for (std::size_t c = 0; c < x.channels(); ++c) {
        auto src = x.channel(c);
        auto dst = out.channel(c);
        const double peak = *std::max_element(src.begin(), src.end());
        double total = 0.0;
        for (std::size_t t = 0; t < src.size(); ++t) {
            dst[t] = std::exp(src[t] - peak);
            total += dst[t];
        }
        for (double& v : dst) v /= total;
    }
    return out;
}

/// Jacobian-vector product: dx_t = s_t * (g_t - sum_u g_u s_u), per channel.
inline TensorCL softmax_length_backward(const TensorCL& grad_out, const TensorCL& cached_output) {
    if (!grad_out.same_shape(cached_output)) throw DimensionError("softmax_length_backward: shape mismatch");
    TensorCL g(grad_out.channels(), grad_out.length());
    for (std::size_t c = 0; c < g.channels(); ++c) {
        auto go = grad_out.channel(c);
        auto s = cached_output.channel(c);
        double inner = 0.0;
        for (std::size_t t = 0; t < s.size(); ++t) inner += go[t] * s[t];
        auto dst = g.channel(c);
        for (std::size_t t = 0; t < s.size(); ++t) dst[t] = s[t] * (go[t] - inner);
    }
    return g;
}

inline double affine_forward(std::span<const double> x, std::span<const double> weights, double bias) {
    if (x.size() != weights.size())
        throw DimensionError("affine_forward: input length " + std::to_string(x.size()) + " != weight length " +
                             std::to_string(weights.size()));
    double s = bias;
    for (std::size_t i = 0; i < x.size(); ++i) s += weights[i] * x[i];
    return s;
}

struct AffineBackward {
    std::vector<double> grad_input;
    std::vector<double> grad_weights;
    double grad_bias = 0.0;
};

inline AffineBackward affine_backward(double grad_out, std::span<const double> cached_x,
                                      std::span<const double> weights) {
    if (cached_x.size() != weights.size()) throw DimensionError("affine_backward: length mismatch");
    AffineBackward r;
    r.grad_input.resize(weights.size());
    r.grad_weights.resize(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        r.grad_input[i] = grad_out * weights[i];
        r.grad_weights[i] = grad_out * cached_x[i];
    }
    r.grad_bias = grad_out;
    return r;
}

}  // namespace iarn
