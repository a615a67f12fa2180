#include "usdiff/ref.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace usdiff::ref {

ImageGrid gaussian_field(RngStream& rng, int height, int width) {
    ImageGrid out(height, width);
    const std::uint64_t key = rng.key();
    const std::uint64_t base = rng.counter();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = detail::gaussian_at(key, base + 2 * static_cast<std::uint64_t>(i));
    }
    rng.skip(2 * static_cast<std::uint64_t>(out.size()));
    return out;
}

void conv3x3_forward(const double* in, int cin, const double* w, const double* bias,
                     double* out, int cout, int H, int W) {
    for (int o = 0; o < cout; ++o) {
        for (int r = 0; r < H; ++r) {
            for (int c = 0; c < W; ++c) {
                double acc = bias ? bias[o] : 0.0;
                for (int i = 0; i < cin; ++i) {
                    const double* plane = in + static_cast<std::size_t>(i) * H * W;
                    const double* wk = w + (static_cast<std::size_t>(o) * cin + i) * 9;
                    for (int dr = -1; dr <= 1; ++dr) {
                        const int rr = r + dr;
                        if (rr < 0 || rr >= H) continue;
                        for (int dc = -1; dc <= 1; ++dc) {
                            const int cc = c + dc;
                            if (cc < 0 || cc >= W) continue;
                            acc += wk[(dr + 1) * 3 + (dc + 1)] * plane[rr * W + cc];
                        }
                    }
                }
                out[static_cast<std::size_t>(o) * H * W + r * W + c] = acc;
            }
        }
    }
}

void conv3x3_backward_input(const double* dout, int cout, const double* w, int cin,
                            double* din, int H, int W) {
    for (int i = 0; i < cin; ++i) {
        for (int r = 0; r < H; ++r) {
            for (int c = 0; c < W; ++c) {
                double acc = 0.0;
                for (int o = 0; o < cout; ++o) {
                    const double* plane = dout + static_cast<std::size_t>(o) * H * W;
                    const double* wk = w + (static_cast<std::size_t>(o) * cin + i) * 9;
                    for (int dr = -1; dr <= 1; ++dr) {
                        const int rr = r - dr;
                        if (rr < 0 || rr >= H) continue;
                        for (int dc = -1; dc <= 1; ++dc) {
                            const int cc = c - dc;
                            if (cc < 0 || cc >= W) continue;
                            acc += wk[(dr + 1) * 3 + (dc + 1)] * plane[rr * W + cc];
                        }
                    }
                }
                din[static_cast<std::size_t>(i) * H * W + r * W + c] = acc;
            }
        }
    }
}

void conv3x3_backward_weights(const double* dout, int cout, const double* in, int cin,
                              double* dw, double* db, int H, int W) {
    for (int o = 0; o < cout; ++o) {
        for (int i = 0; i < cin; ++i) {
            for (int k = 0; k < 9; ++k) {
                const int dr = k / 3 - 1;
                const int dc = k % 3 - 1;
                const double* gplane = dout + static_cast<std::size_t>(o) * H * W;
                const double* iplane = in + static_cast<std::size_t>(i) * H * W;
                double acc = 0.0;
                for (int r = 0; r < H; ++r) {
                    const int rr = r + dr;
                    if (rr < 0 || rr >= H) continue;
                    for (int c = 0; c < W; ++c) {
                        const int cc = c + dc;
                        if (cc < 0 || cc >= W) continue;
                        acc += gplane[r * W + c] * iplane[rr * W + cc];
                    }
                }
                dw[(static_cast<std::size_t>(o) * cin + i) * 9 + k] += acc;
            }
        }
    }
    for (int o = 0; o < cout; ++o) {
        const double* gplane = dout + static_cast<std::size_t>(o) * H * W;
        double acc = 0.0;
        for (int p = 0; p < H * W; ++p) acc += gplane[p];
        db[o] += acc;
    }
}

void silu_forward(const double* in, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double x = in[i];
        const double s = 1.0 / (1.0 + std::exp(-x));
        out[i] = x * s;
    }
}

void silu_backward(const double* dout, const double* in, double* din, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double x = in[i];
        const double s = 1.0 / (1.0 + std::exp(-x));
        din[i] = dout[i] * s * (1.0 + x * (1.0 - s));
    }
}

ImageGrid forward_closed_xt(const ImageGrid& x0, const ImageGrid& coeff,
                            const ImageGrid& eps) {
    ImageGrid out(x0.height(), x0.width());
    for (std::size_t i = 0; i < x0.size(); ++i) {
        out[i] = std::sqrt(coeff[i]) * x0[i] + std::sqrt(1.0 - coeff[i]) * eps[i];
    }
    return out;
}

double ssim(const ImageGrid& a, const ImageGrid& b) {
    require_same_shape(a, b, "ref::ssim");
    constexpr int win = 11;
    constexpr double sigma = 1.5;
    constexpr double C1 = 1e-4, C2 = 9e-4;
    if (a.height() < win || a.width() < win) {
        throw DimensionError("ref::ssim: image smaller than the 11x11 window");
    }
    std::vector<double> weights(win * win);
    double wsum = 0.0;
    for (int r = 0; r < win; ++r) {
        for (int c = 0; c < win; ++c) {
            const double dr = r - win / 2, dc = c - win / 2;
            const double v = std::exp(-(dr * dr + dc * dc) / (2.0 * sigma * sigma));
            weights[r * win + c] = v;
            wsum += v;
        }
    }
    for (double& v : weights) v /= wsum;

    const int out_h = a.height() - win + 1;
    const int out_w = a.width() - win + 1;
    double sum = 0.0;
    for (int wr = 0; wr < out_h; ++wr) {
        for (int wc = 0; wc < out_w; ++wc) {
            double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
            for (int r = 0; r < win; ++r) {
                for (int c = 0; c < win; ++c) {
                    const double w = weights[r * win + c];
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
            sum += ((2.0 * mx * my + C1) * (2.0 * cxy + C2)) /
                   ((mx * mx + my * my + C1) * (vx + vy + C2));
        }
    }
    return sum / (static_cast<double>(out_h) * out_w);
}

ForwardSample ddpm_forward_closed(const ImageGrid& x0, int t, const ScheduleTable& sched,
                                  RngStream& rng) {
    require_timestep(t, sched.T, "ddpm_forward_closed");
    ForwardSample sample;
    sample.t = t;
    sample.eps = ref::gaussian_field(rng, x0.height(), x0.width());
    sample.x_t = ImageGrid(x0.height(), x0.width());
    const double c = sched.alpha_bar_at(t);
    for (std::size_t i = 0; i < x0.size(); ++i) {
        sample.x_t[i] = std::sqrt(c) * x0[i] + std::sqrt(1.0 - c) * sample.eps[i];
    }
    return sample;
}

PosteriorParams ddpm_posterior_params(const ImageGrid& x_t, const ImageGrid& x0_hat, int t,
                                      const ScheduleTable& sched) {
    if (t < 2 || t > sched.T) throw IndexError("ddpm_posterior_params: t must lie in 2..T");
    require_same_shape(x_t, x0_hat, "ddpm_posterior_params");
    const double a_step = sched.alpha_at(t);
    const double a_prev = sched.alpha_bar_at(t - 1);
    const double denom = 1.0 - sched.alpha_bar_at(t);
    PosteriorParams out;
    out.mu = ImageGrid(x_t.height(), x_t.width());
    out.sigma2 = ImageGrid(x_t.height(), x_t.width());
    for (std::size_t i = 0; i < x_t.size(); ++i) {
        out.mu[i] = (std::sqrt(a_step) * (1.0 - a_prev) * x_t[i] +
                     std::sqrt(a_prev) * (1.0 - a_step) * x0_hat[i]) /
                    denom;
        out.sigma2[i] = (1.0 - a_step) * (1.0 - a_prev) / denom;
    }
    return out;
}

ImageGrid ddpm_predict_x0_from_eps(const ImageGrid& x_t, const ImageGrid& eps_hat, int t,
                                   const ScheduleTable& sched) {
    require_timestep(t, sched.T, "ddpm_predict_x0_from_eps");
    require_same_shape(x_t, eps_hat, "ddpm_predict_x0_from_eps");
    const double c = sched.alpha_bar_at(t);
    ImageGrid out(x_t.height(), x_t.width());
    for (std::size_t i = 0; i < x_t.size(); ++i) {
        if (c <= 1e-12) {
            out[i] = 0.0;
            continue;
        }
        const double x0 = (x_t[i] - std::sqrt(1.0 - c) * eps_hat[i]) / std::sqrt(c);
        out[i] = std::clamp(x0, -1.0, 1.0);
    }
    return out;
}

ImageGrid ddpm_ancestral_sample(const EpsPredictor& denoiser, const ScheduleTable& sched,
                                int height, int width, RngStream& rng) {
    ImageGrid x = ref::gaussian_field(rng, height, width);
    for (int t = sched.T; t >= 2; --t) {
        const ImageGrid eps_hat = denoiser(x, t);
        const ImageGrid x0_hat = ddpm_predict_x0_from_eps(x, eps_hat, t, sched);
        const PosteriorParams post = ddpm_posterior_params(x, x0_hat, t, sched);
        const ImageGrid z = ref::gaussian_field(rng, height, width);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = post.mu[i] + std::sqrt(post.sigma2[i]) * z[i];
        }
    }
    const ImageGrid eps_hat = denoiser(x, 1);
    x = ddpm_predict_x0_from_eps(x, eps_hat, 1, sched);
    return grid_clamp(x, -1.0, 1.0);
}

}  // namespace usdiff::ref
