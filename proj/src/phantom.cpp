#include "usdiff/phantom.hpp"

#include <algorithm>
#include <cmath>

namespace usdiff {

namespace {
constexpr double kRayleighUnitMean = 1.2533141373155003;  // sqrt(pi/2)

void validate(const PhantomSpec& spec) {
    if (spec.height < 1 || spec.width < 1) {
        throw DimensionError("phantom: dimensions must be >= 1");
    }
    if (spec.mu_att < 0.0) throw ParameterError("phantom: mu_att must be >= 0");
    if (spec.speckle_sigma <= 0.0) throw ParameterError("phantom: speckle_sigma must be > 0");
    for (const Inclusion& inc : spec.inclusions) {
        if (inc.radius_row <= 0.0 || inc.radius_col <= 0.0) {
            throw ParameterError("phantom: inclusion radii must be positive");
        }
        if (inc.echogenicity < 0.0) {
            throw ParameterError("phantom: echogenicity must be non-negative");
        }
    }
}
}  // namespace

ImageGrid phantom_generate(const PhantomSpec& spec, RngStream& rng) {
    validate(spec);
    const int H = spec.height, W = spec.width;
    const ImageGrid mask = cone_mask(spec.cone, H, W);

    // One uniform per pixel, consumed via the counter so the fill is
    // order-free and parallel-safe.
    const std::uint64_t key = rng.key();
    const std::uint64_t base = rng.counter();
    ImageGrid img(H, W);
    const std::int64_t n = static_cast<std::int64_t>(img.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const int r = static_cast<int>(i / W);
        const int c = static_cast<int>(i % W);

        const double u =
            (static_cast<double>(detail::rng_value_at(key, base + static_cast<std::uint64_t>(i)) >> 11) +
             1.0) *
            0x1.0p-53;
        const double speckle =
            spec.speckle_sigma * std::sqrt(-2.0 * std::log(u)) /
            (spec.speckle_sigma * kRayleighUnitMean);

        double echo = spec.background;
        for (const Inclusion& inc : spec.inclusions) {
            const double dr = (r - inc.center_row) / inc.radius_row;
            const double dc = (c - inc.center_col) / inc.radius_col;
            if (dr * dr + dc * dc <= 1.0) echo *= inc.echogenicity;
        }

        const double attenuation = std::exp(-spec.mu_att * r);
        const double intensity =
            std::clamp(attenuation * echo * speckle, 0.0, 1.0) * mask.at(r, c);
        img[static_cast<std::size_t>(i)] = intensity * 2.0 - 1.0;
    }
    rng.skip(static_cast<std::uint64_t>(n));
    return img;
}

PhantomSpec randomize_inclusions(const PhantomSpec& spec, RngStream& rng) {
    PhantomSpec out = spec;
    for (Inclusion& inc : out.inclusions) {
        inc.center_row = rng.next_unit() * (spec.height - 1);
        inc.center_col = rng.next_unit() * (spec.width - 1);
        inc.radius_row *= 0.7 + 0.6 * rng.next_unit();
        inc.radius_col *= 0.7 + 0.6 * rng.next_unit();
    }
    return out;
}

std::vector<ImageGrid> phantom_dataset(int n, const PhantomSpec& spec, std::uint64_t seed) {
    if (n < 1) throw ParameterError("phantom_dataset: n must be >= 1");
    validate(spec);
    std::vector<ImageGrid> images;
    images.reserve(static_cast<std::size_t>(n));
    const RngStream root(seed);
    for (int i = 0; i < n; ++i) {
        RngStream s = root.child(static_cast<std::uint64_t>(i));
        const PhantomSpec local = randomize_inclusions(spec, s);
        images.push_back(phantom_generate(local, s));
    }
    return images;
}

std::vector<double> depth_profile(const ImageGrid& img) {
    std::vector<double> profile(static_cast<std::size_t>(img.height()), 0.0);
    for (int r = 0; r < img.height(); ++r) {
        double sum = 0.0;
        for (int c = 0; c < img.width(); ++c) sum += img.at(r, c);
        profile[static_cast<std::size_t>(r)] = sum / img.width();
    }
    return profile;
}

std::vector<double> depth_profile(const ImageGrid& img, const ImageGrid& mask) {
    require_same_shape(img, mask, "depth_profile");
    std::vector<double> profile(static_cast<std::size_t>(img.height()), 0.0);
    for (int r = 0; r < img.height(); ++r) {
        double sum = 0.0;
        int count = 0;
        for (int c = 0; c < img.width(); ++c) {
            if (mask.at(r, c) != 0.0) {
                sum += img.at(r, c);
                ++count;
            }
        }
        profile[static_cast<std::size_t>(r)] = count > 0 ? sum / count : 0.0;
    }
    return profile;
}

}  // namespace usdiff
