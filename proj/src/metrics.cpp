#include "usdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace usdiff {

namespace {
constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 1e-4;  // (K1 * L)^2 with K1=0.01, L=1
constexpr double kSsimC2 = 9e-4;  // (K2 * L)^2 with K2=0.03, L=1
constexpr double kPsnrCap = 99.0;

std::vector<double> ssim_window_weights() {
    std::vector<double> w(kSsimWindow * kSsimWindow);
    const int half = kSsimWindow / 2;
    double sum = 0.0;
    for (int r = 0; r < kSsimWindow; ++r) {
        for (int c = 0; c < kSsimWindow; ++c) {
            const double dr = r - half, dc = c - half;
            const double v = std::exp(-(dr * dr + dc * dc) / (2.0 * kSsimSigma * kSsimSigma));
            w[r * kSsimWindow + c] = v;
            sum += v;
        }
    }
    for (double& v : w) v /= sum;
    return w;
}
}  // namespace

double psnr(const ImageGrid& a, const ImageGrid& b, double max_value) {
    require_same_shape(a, b, "psnr");
    if (max_value <= 0.0) throw ParameterError("psnr: max_value must be > 0");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse == 0.0) return kPsnrCap;
    return 10.0 * std::log10(max_value * max_value / mse);
}

double ssim(const ImageGrid& a, const ImageGrid& b) {
    require_same_shape(a, b, "ssim");
    if (a.height() < kSsimWindow || a.width() < kSsimWindow) {
        throw DimensionError("ssim: image smaller than the 11x11 window");
    }
    static const std::vector<double> weights = ssim_window_weights();

    const int H = a.height(), W = a.width();
    const int out_h = H - kSsimWindow + 1;
    const int out_w = W - kSsimWindow + 1;
    std::vector<double> scores(static_cast<std::size_t>(out_h) * out_w);

#pragma omp parallel for schedule(static)
    for (int wr = 0; wr < out_h; ++wr) {
        for (int wc = 0; wc < out_w; ++wc) {
            double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
            for (int r = 0; r < kSsimWindow; ++r) {
                for (int c = 0; c < kSsimWindow; ++c) {
                    const double w = weights[r * kSsimWindow + c];
                    const double x = a.at(wr + r, wc + c);
                    const double y = b.at(wr + r, wc + c);
                    mx += w * x;
                    my += w * y;
                    sxx += w * x * x;
                    syy += w * y * y;
                    sxy += w * x * y;
                }
            }
            const double vx = sxx - mx * mx;
            const double vy = syy - my * my;
            const double cxy = sxy - mx * my;
            scores[static_cast<std::size_t>(wr) * out_w + wc] =
                ((2.0 * mx * my + kSsimC1) * (2.0 * cxy + kSsimC2)) /
                ((mx * mx + my * my + kSsimC1) * (vx + vy + kSsimC2));
        }
    }

    double sum = 0.0;
    for (double s : scores) sum += s;
    return sum / static_cast<double>(scores.size());
}

std::vector<double> embed_pixel_stat(const ImageGrid& image) {
    const int blocks = 8;
    if (image.height() < blocks || image.width() < blocks) {
        throw DimensionError("embed_pixel_stat: image must be at least 8x8");
    }
    std::vector<double> features(blocks * blocks);
    for (int br = 0; br < blocks; ++br) {
        const int r0 = br * image.height() / blocks;
        const int r1 = (br + 1) * image.height() / blocks;
        for (int bc = 0; bc < blocks; ++bc) {
            const int c0 = bc * image.width() / blocks;
            const int c1 = (bc + 1) * image.width() / blocks;
            double sum = 0.0;
            for (int r = r0; r < r1; ++r) {
                for (int c = c0; c < c1; ++c) sum += image.at(r, c);
            }
            features[br * blocks + bc] = sum / ((r1 - r0) * (c1 - c0));
        }
    }
    return features;
}

FeatureStats feature_stats_from_matrix(int n_images, int dim,
                                       const std::vector<double>& features) {
    if (n_images < 2) throw ParameterError("feature stats require at least 2 samples");
    if (features.size() != static_cast<std::size_t>(n_images) * dim) {
        throw DimensionError("feature_stats_from_matrix: payload size mismatch");
    }
    FeatureStats stats;
    stats.dim = dim;
    stats.count = n_images;
    stats.mean.assign(static_cast<std::size_t>(dim), 0.0);
    stats.cov.assign(static_cast<std::size_t>(dim) * dim, 0.0);

    for (int i = 0; i < n_images; ++i) {
        const double* row = features.data() + static_cast<std::size_t>(i) * dim;
        for (int j = 0; j < dim; ++j) stats.mean[static_cast<std::size_t>(j)] += row[j];
    }
    for (double& v : stats.mean) v /= n_images;

    for (int i = 0; i < n_images; ++i) {
        const double* row = features.data() + static_cast<std::size_t>(i) * dim;
        for (int j = 0; j < dim; ++j) {
            const double dj = row[j] - stats.mean[static_cast<std::size_t>(j)];
            for (int k = j; k < dim; ++k) {
                const double dk = row[k] - stats.mean[static_cast<std::size_t>(k)];
                stats.cov[static_cast<std::size_t>(j) * dim + k] += dj * dk;
            }
        }
    }
    const double denom = static_cast<double>(n_images - 1);
    for (int j = 0; j < dim; ++j) {
        for (int k = j; k < dim; ++k) {
            const double v = stats.cov[static_cast<std::size_t>(j) * dim + k] / denom;
            stats.cov[static_cast<std::size_t>(j) * dim + k] = v;
            stats.cov[static_cast<std::size_t>(k) * dim + j] = v;
        }
    }
    return stats;
}

FeatureStats feature_embed(const std::vector<ImageGrid>& images) {
    if (images.size() < 2) throw ParameterError("feature_embed: need at least 2 images");
    const int dim = 64;
    std::vector<double> rows(images.size() * static_cast<std::size_t>(dim));
    const std::int64_t n = static_cast<std::int64_t>(images.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const std::vector<double> f = embed_pixel_stat(images[static_cast<std::size_t>(i)]);
        std::copy(f.begin(), f.end(),
                  rows.begin() + static_cast<std::size_t>(i) * dim);
    }
    return feature_stats_from_matrix(static_cast<int>(images.size()), dim, rows);
}

namespace detail {

std::vector<double> mat_mul(const std::vector<double>& a, const std::vector<double>& b, int n) {
    std::vector<double> out(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) {
            const double aik = a[static_cast<std::size_t>(i) * n + k];
            if (aik == 0.0) continue;
            for (int j = 0; j < n; ++j) {
                out[static_cast<std::size_t>(i) * n + j] +=
                    aik * b[static_cast<std::size_t>(k) * n + j];
            }
        }
    }
    return out;
}

double trace(const std::vector<double>& m, int n) {
    double t = 0.0;
    for (int i = 0; i < n; ++i) t += m[static_cast<std::size_t>(i) * n + i];
    return t;
}

}  // namespace detail

std::vector<double> matrix_sqrt_psd(const std::vector<double>& m, int dim) {
    if (m.size() != static_cast<std::size_t>(dim) * dim) {
        throw DimensionError("matrix_sqrt_psd: size mismatch");
    }
    double scale = 0.0;
    for (double v : m) scale = std::max(scale, std::abs(v));
    for (int i = 0; i < dim; ++i) {
        for (int j = i + 1; j < dim; ++j) {
            const double d = std::abs(m[static_cast<std::size_t>(i) * dim + j] -
                                      m[static_cast<std::size_t>(j) * dim + i]);
            if (d > 1e-8 * std::max(1.0, scale)) {
                throw ParameterError("matrix_sqrt_psd: input is not symmetric");
            }
        }
    }

    // Cyclic Jacobi on a symmetrized working copy; Q accumulates rotations.
    std::vector<double> a(m);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
            const double v = 0.5 * (m[static_cast<std::size_t>(i) * dim + j] +
                                    m[static_cast<std::size_t>(j) * dim + i]);
            a[static_cast<std::size_t>(i) * dim + j] = v;
        }
    }
    std::vector<double> q(static_cast<std::size_t>(dim) * dim, 0.0);
    for (int i = 0; i < dim; ++i) q[static_cast<std::size_t>(i) * dim + i] = 1.0;

    auto off_norm = [&]() {
        double s = 0.0;
        for (int i = 0; i < dim; ++i) {
            for (int j = i + 1; j < dim; ++j) {
                const double v = a[static_cast<std::size_t>(i) * dim + j];
                s += 2.0 * v * v;
            }
        }
        return std::sqrt(s);
    };

    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps && off_norm() > 1e-12 * std::max(1.0, scale); ++sweep) {
        for (int p = 0; p < dim - 1; ++p) {
            for (int qn = p + 1; qn < dim; ++qn) {
                const double apq = a[static_cast<std::size_t>(p) * dim + qn];
                if (apq == 0.0) continue;
                const double app = a[static_cast<std::size_t>(p) * dim + p];
                const double aqq = a[static_cast<std::size_t>(qn) * dim + qn];
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < dim; ++k) {
                    const double akp = a[static_cast<std::size_t>(k) * dim + p];
                    const double akq = a[static_cast<std::size_t>(k) * dim + qn];
                    a[static_cast<std::size_t>(k) * dim + p] = c * akp - s * akq;
                    a[static_cast<std::size_t>(k) * dim + qn] = s * akp + c * akq;
                }
                for (int k = 0; k < dim; ++k) {
                    const double apk = a[static_cast<std::size_t>(p) * dim + k];
                    const double aqk = a[static_cast<std::size_t>(qn) * dim + k];
                    a[static_cast<std::size_t>(p) * dim + k] = c * apk - s * aqk;
                    a[static_cast<std::size_t>(qn) * dim + k] = s * apk + c * aqk;
                }
                for (int k = 0; k < dim; ++k) {
                    const double qkp = q[static_cast<std::size_t>(k) * dim + p];
                    const double qkq = q[static_cast<std::size_t>(k) * dim + qn];
                    q[static_cast<std::size_t>(k) * dim + p] = c * qkp - s * qkq;
                    q[static_cast<std::size_t>(k) * dim + qn] = s * qkp + c * qkq;
                }
            }
        }
    }

    std::vector<double> sqrt_eig(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) {
        double lambda = a[static_cast<std::size_t>(i) * dim + i];
        if (lambda < -1e-8 * std::max(1.0, scale)) {
            throw ParameterError("matrix_sqrt_psd: input has a significantly negative eigenvalue");
        }
        sqrt_eig[static_cast<std::size_t>(i)] = std::sqrt(std::max(0.0, lambda));
    }

    // Q * sqrt(Lambda) * Q^T
    std::vector<double> out(static_cast<std::size_t>(dim) * dim, 0.0);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
            double s = 0.0;
            for (int k = 0; k < dim; ++k) {
                s += q[static_cast<std::size_t>(i) * dim + k] * sqrt_eig[static_cast<std::size_t>(k)] *
                     q[static_cast<std::size_t>(j) * dim + k];
            }
            out[static_cast<std::size_t>(i) * dim + j] = s;
        }
    }
    return out;
}

double frechet_distance(const FeatureStats& s1, const FeatureStats& s2) {
    if (s1.dim != s2.dim) throw DimensionError("frechet_distance: dim mismatch");
    const int n = s1.dim;

    double mean_term = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = s1.mean[static_cast<std::size_t>(i)] - s2.mean[static_cast<std::size_t>(i)];
        mean_term += d * d;
    }

    const std::vector<double> root1 = matrix_sqrt_psd(s1.cov, n);
    std::vector<double> inner = detail::mat_mul(detail::mat_mul(root1, s2.cov, n), root1, n);
    // Symmetrize before the second root; the product is symmetric up to
    // round-off.
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double v = 0.5 * (inner[static_cast<std::size_t>(i) * n + j] +
                                    inner[static_cast<std::size_t>(j) * n + i]);
            inner[static_cast<std::size_t>(i) * n + j] = v;
            inner[static_cast<std::size_t>(j) * n + i] = v;
        }
    }
    const std::vector<double> cross_root = matrix_sqrt_psd(inner, n);

    const double d2 = mean_term + detail::trace(s1.cov, n) + detail::trace(s2.cov, n) -
                      2.0 * detail::trace(cross_root, n);
    return std::max(0.0, d2);
}

}  // namespace usdiff
