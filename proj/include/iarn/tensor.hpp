#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iarn/error.hpp"

namespace iarn {

inline bool all_finite(std::span<const double> values) {
    for (double v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

inline void require_finite(std::span<const double> values, const std::string& what) {
    if (!all_finite(values)) throw NumericError(what + ": non-finite value");
}

/// Dense channels x length array of doubles, stored channel-major.
class TensorCL {
public:
    TensorCL() = default;

    /// Zero-filled tensor.
    TensorCL(std::size_t channels, std::size_t length)
        : channels_(channels), length_(length), data_(channels * length, 0.0) {
        if (channels == 0 || length == 0) throw DimensionError("TensorCL: channels and length must be positive");
    }

    TensorCL(std::size_t channels, std::size_t length, std::vector<double> data)
        : channels_(channels), length_(length), data_(std::move(data)) {
        if (channels == 0 || length == 0) throw DimensionError("TensorCL: channels and length must be positive");
        if (data_.size() != channels * length)
            throw DimensionError("TensorCL: data size " + std::to_string(data_.size()) + " != " +
                                 std::to_string(channels) + "x" + std::to_string(length));
        require_finite(data_, "TensorCL");
    }

    static TensorCL row(std::span<const double> values) {
        return TensorCL(1, values.size(), std::vector<double>(values.begin(), values.end()));
    }

    std::size_t channels() const noexcept { return channels_; }
    std::size_t length() const noexcept { return length_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t c, std::size_t t) noexcept { return data_[c * length_ + t]; }
    double operator()(std::size_t c, std::size_t t) const noexcept { return data_[c * length_ + t]; }

    std::span<double> channel(std::size_t c) noexcept { return {data_.data() + c * length_, length_}; }
    std::span<const double> channel(std::size_t c) const noexcept { return {data_.data() + c * length_, length_}; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    bool same_shape(const TensorCL& other) const noexcept {
        return channels_ == other.channels_ && length_ == other.length_;
    }

    TensorCL& operator+=(const TensorCL& other) {
        if (!same_shape(other)) throw DimensionError("TensorCL +=: shape mismatch");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
        return *this;
    }

    friend bool operator==(const TensorCL&, const TensorCL&) = default;

private:
    std::size_t channels_ = 0;
    std::size_t length_ = 0;
    std::vector<double> data_;
};

inline std::string shape_str(const TensorCL& t) {
    return std::to_string(t.channels()) + "x" + std::to_string(t.length());
}

}  // namespace iarn
