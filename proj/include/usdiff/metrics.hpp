#pragma once

#include <cstdint>
#include <vector>

#include "usdiff/grid.hpp"

namespace usdiff {

// Peak signal-to-noise ratio in dB. Identical images return the 99.0 dB cap.
double psnr(const ImageGrid& a, const ImageGrid& b, double max_value);

// Single-scale SSIM with the canonical 11x11 Gaussian window (sigma 1.5),
// K1=0.01, K2=0.03, dynamic range 1. Inputs are expected in [0,1]; the mean
// is taken over valid (fully interior) window positions.
double ssim(const ImageGrid& a, const ImageGrid& b);

// Gaussian fit of a feature embedding of an image set.
struct FeatureStats {
    int dim = 0;
    std::int64_t count = 0;
    std::vector<double> mean;  // length dim
    std::vector<double> cov;   // dim x dim, row-major, unbiased
};

// Default embedding: 8x8 block-mean downsample, flattened to 64 features.
// Images must be at least 8x8 and are expected in [0,1].
std::vector<double> embed_pixel_stat(const ImageGrid& image);

FeatureStats feature_embed(const std::vector<ImageGrid>& images);

// Same statistics over externally supplied per-image feature vectors
// (n_images x dim, row-major). This is the hook for features exported from
// a pretrained network.
FeatureStats feature_stats_from_matrix(int n_images, int dim,
                                       const std::vector<double>& features);

// Principal square root of a symmetric PSD matrix by cyclic Jacobi
// eigendecomposition. Eigenvalues in [-1e-8, 0) are clipped to zero;
// asymmetry beyond 1e-8 is an error.
std::vector<double> matrix_sqrt_psd(const std::vector<double>& m, int dim);

// Squared Frechet distance between the two Gaussian fits (FID convention):
// |mu1-mu2|^2 + Tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2). Negative round-off
// is clipped at zero.
double frechet_distance(const FeatureStats& s1, const FeatureStats& s2);

namespace detail {
std::vector<double> mat_mul(const std::vector<double>& a, const std::vector<double>& b, int n);
double trace(const std::vector<double>& m, int n);
}  // namespace detail

}  // namespace usdiff
