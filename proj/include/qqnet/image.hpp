#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "error.hpp"

namespace qqnet {

/// Row-major raster of double samples, channel-interleaved.
///
/// A single-channel Image doubles as the scalar field type used for every
/// intermediate map (smoothed images, derivatives, feature maps).
class Image {
public:
    Image() = default;

    Image(int width, int height, int channels = 1, double fill = 0.0)
        : width_(width), height_(height), channels_(channels) {
        detail::require(width >= 1 && height >= 1, "Image: dimensions must be >= 1");
        detail::require(channels == 1 || channels == 3, "Image: channels must be 1 or 3");
        data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
    }

    Image(int width, int height, int channels, std::vector<double> data)
        : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
        detail::require(width >= 1 && height >= 1, "Image: dimensions must be >= 1");
        detail::require(channels == 1 || channels == 3, "Image: channels must be 1 or 3");
        detail::require(data_.size() == static_cast<std::size_t>(width) * height * channels,
                        "Image: data length does not match width*height*channels");
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(width_) * height_;
    }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(int x, int y, int c = 0) noexcept {
        assert(x >= 0 && x < width_ && y >= 0 && y < height_ && c >= 0 && c < channels_);
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    double operator()(int x, int y, int c = 0) const noexcept {
        assert(x >= 0 && x < width_ && y >= 0 && y < height_ && c >= 0 && c < channels_);
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::vector<double>& storage() noexcept { return data_; }

    /// Row `y` of a single-channel image.
    std::span<double> row(int y) noexcept {
        return {data_.data() + static_cast<std::size_t>(y) * width_ * channels_,
                static_cast<std::size_t>(width_) * channels_};
    }
    std::span<const double> row(int y) const noexcept {
        return {data_.data() + static_cast<std::size_t>(y) * width_ * channels_,
                static_cast<std::size_t>(width_) * channels_};
    }

    bool same_shape(const Image& o) const noexcept {
        return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
    }

    bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    /// Extracts channel `c` as a single-channel image.
    Image channel(int c) const {
        detail::require(c >= 0 && c < channels_, "Image::channel: index out of range");
        Image out(width_, height_, 1);
        for (std::size_t i = 0; i < pixel_count(); ++i) out.data_[i] = data_[i * channels_ + c];
        return out;
    }

    friend bool operator==(const Image&, const Image&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

/// Whole-sample symmetric reflection of an index into [0, n).
inline int mirror_index(int i, int n) noexcept {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

/// Axis-aligned interior rectangle [x0, x1) x [y0, y1).
struct Region {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    int width() const noexcept { return x1 - x0; }
    int height() const noexcept { return y1 - y0; }
    bool empty() const noexcept { return x1 <= x0 || y1 <= y0; }

    static Region interior(const Image& img, int band) noexcept {
        return {band, band, img.width() - band, img.height() - band};
    }
};

}  // namespace qqnet
