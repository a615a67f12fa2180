#include "usdiff/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace usdiff {

ImageGrid::ImageGrid(int height, int width, double fill) {
    if (height < 1 || width < 1) {
        throw DimensionError("ImageGrid: dimensions must be >= 1, got " +
                             std::to_string(height) + "x" + std::to_string(width));
    }
    height_ = height;
    width_ = width;
    data_.assign(static_cast<std::size_t>(height) * width, fill);
}

bool ImageGrid::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double ImageGrid::min_value() const {
    return *std::min_element(data_.begin(), data_.end());
}

double ImageGrid::max_value() const {
    return *std::max_element(data_.begin(), data_.end());
}

double ImageGrid::mean() const {
    double s = 0.0;
    for (double v : data_) s += v;
    return s / static_cast<double>(data_.size());
}

void require_same_shape(const ImageGrid& a, const ImageGrid& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " +
                             std::to_string(a.height()) + "x" + std::to_string(a.width()) + " vs " +
                             std::to_string(b.height()) + "x" + std::to_string(b.width()));
    }
}

ImageGrid grid_fill(int height, int width, double value) {
    return ImageGrid(height, width, value);
}

ImageGrid hadamard(const ImageGrid& a, const ImageGrid& b) {
    require_same_shape(a, b, "hadamard");
    ImageGrid out(a.height(), a.width());
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
    return out;
}

ImageGrid grid_add(const ImageGrid& a, const ImageGrid& b) {
    require_same_shape(a, b, "grid_add");
    ImageGrid out(a.height(), a.width());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

ImageGrid grid_sub(const ImageGrid& a, const ImageGrid& b) {
    require_same_shape(a, b, "grid_sub");
    ImageGrid out(a.height(), a.width());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

ImageGrid grid_scale(const ImageGrid& a, double s) {
    ImageGrid out(a.height(), a.width());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
    return out;
}

ImageGrid grid_sqrt(const ImageGrid& a) {
    ImageGrid out(a.height(), a.width());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::sqrt(a[i]);
    return out;
}

ImageGrid grid_clamp(const ImageGrid& a, double lo, double hi) {
    ImageGrid out(a.height(), a.width());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::clamp(a[i], lo, hi);
    return out;
}

ImageGrid to_unit_range(const ImageGrid& signed_img) {
    ImageGrid out(signed_img.height(), signed_img.width());
    for (std::size_t i = 0; i < signed_img.size(); ++i) out[i] = (signed_img[i] + 1.0) * 0.5;
    return out;
}

ImageGrid to_signed_range(const ImageGrid& unit_img) {
    ImageGrid out(unit_img.height(), unit_img.width());
    for (std::size_t i = 0; i < unit_img.size(); ++i) out[i] = unit_img[i] * 2.0 - 1.0;
    return out;
}

}  // namespace usdiff
