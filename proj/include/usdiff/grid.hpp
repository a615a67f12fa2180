#pragma once

#include <cstddef>
#include <vector>

#include "usdiff/errors.hpp"

namespace usdiff {

// Row-major H x W grid of doubles. Row 0 is the top of the image, i.e. the
// shallowest depth (nearest the probe); this orientation is used everywhere.
class ImageGrid {
public:
    ImageGrid() = default;
    ImageGrid(int height, int width, double fill = 0.0);

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return data_.size(); }

    double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * width_ + c]; }
    double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * width_ + c]; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const ImageGrid& other) const {
        return height_ == other.height_ && width_ == other.width_;
    }

    bool all_finite() const;
    double min_value() const;
    double max_value() const;
    double mean() const;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

ImageGrid grid_fill(int height, int width, double value);

// Elementwise product; the workhorse of the per-pixel schedule math.
ImageGrid hadamard(const ImageGrid& a, const ImageGrid& b);

ImageGrid grid_add(const ImageGrid& a, const ImageGrid& b);
ImageGrid grid_sub(const ImageGrid& a, const ImageGrid& b);
ImageGrid grid_scale(const ImageGrid& a, double s);
ImageGrid grid_sqrt(const ImageGrid& a);
ImageGrid grid_clamp(const ImageGrid& a, double lo, double hi);

// Remaps between the diffusion-model range [-1,1] and the metric range [0,1].
// Conversions are always explicit; no operation remaps implicitly.
ImageGrid to_unit_range(const ImageGrid& signed_img);   // [-1,1] -> [0,1]
ImageGrid to_signed_range(const ImageGrid& unit_img);   // [0,1] -> [-1,1]

void require_same_shape(const ImageGrid& a, const ImageGrid& b, const char* op);

}  // namespace usdiff
