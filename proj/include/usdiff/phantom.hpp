#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "usdiff/rng.hpp"
#include "usdiff/schedule.hpp"

namespace usdiff {

// Elliptical region with an echogenicity multiplier: < 1 hypoechoic (dark),
// > 1 hyperechoic (bright).
struct Inclusion {
    double center_row = 0.0;
    double center_col = 0.0;
    double radius_row = 1.0;
    double radius_col = 1.0;
    double echogenicity = 1.0;  // in [0, 2]
};

struct PhantomSpec {
    int height = 32;
    int width = 32;
    double mu_att = 0.05;        // per-row exponential intensity decay
    double speckle_sigma = 1.0;  // Rayleigh scale; cancels under unit-mean normalization
    double background = 0.65;    // background echogenicity
    std::vector<Inclusion> inclusions;
    std::optional<ConeSpec> cone;
};

// Speckle * echogenicity * exp(-mu_att * row), clamped to [0,1], masked by
// the cone, then remapped to [-1,1]. Speckle is i.i.d. Rayleigh normalized
// to unit mean.
ImageGrid phantom_generate(const PhantomSpec& spec, RngStream& rng);

// Copy of spec with inclusion centers redrawn uniformly inside the grid and
// radii jittered +-30%; echogenicities are kept. Consumes from rng.
PhantomSpec randomize_inclusions(const PhantomSpec& spec, RngStream& rng);

// n phantoms with randomized inclusion placement; image i uses substream i
// of the seed, so datasets are reproducible and order-independent.
std::vector<ImageGrid> phantom_dataset(int n, const PhantomSpec& spec, std::uint64_t seed);

// Per-row mean. With a mask, rows average only pixels where mask != 0;
// rows fully outside the mask report 0.
std::vector<double> depth_profile(const ImageGrid& img);
std::vector<double> depth_profile(const ImageGrid& img, const ImageGrid& mask);

}  // namespace usdiff
