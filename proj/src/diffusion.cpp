#include "usdiff/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace usdiff {

namespace {
constexpr double kCoeffFloor = 1e-12;

void require_stack_shape(const ImageGrid& g, const BMapStack& stack, const char* op) {
    if (g.height() != stack.height() || g.width() != stack.width()) {
        throw DimensionError(std::string(op) + ": grid does not match B-map stack shape");
    }
}
}  // namespace

ImageGrid forward_step(const ImageGrid& x_prev, int t, const ScheduleTable& sched,
                       const BMapStack& stack, RngStream& rng) {
    require_timestep(t, sched.T, "forward_step");
    require_stack_shape(x_prev, stack, "forward_step");
    const ImageGrid eps = gaussian_field(rng, x_prev.height(), x_prev.width());
    const ImageGrid& b_t = stack.B_at(t);
    const double alpha_t = sched.alpha_at(t);
    ImageGrid out(x_prev.height(), x_prev.width());
    const std::int64_t n = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t k = static_cast<std::size_t>(i);
        const double ab = alpha_t * b_t[k];
        out[k] = std::sqrt(ab) * x_prev[k] + std::sqrt(1.0 - ab) * eps[k];
    }
    return out;
}

ForwardSample forward_closed(const ImageGrid& x0, int t, const ScheduleTable& sched,
                             const BMapStack& stack, RngStream& rng) {
    require_timestep(t, sched.T, "forward_closed");
    require_stack_shape(x0, stack, "forward_closed");
    ForwardSample sample;
    sample.t = t;
    sample.eps = gaussian_field(rng, x0.height(), x0.width());
    sample.x_t = ImageGrid(x0.height(), x0.width());
    const ImageGrid& coeff = stack.coeff_at(t);
    const std::int64_t n = static_cast<std::int64_t>(x0.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t k = static_cast<std::size_t>(i);
        sample.x_t[k] = std::sqrt(coeff[k]) * x0[k] + std::sqrt(1.0 - coeff[k]) * sample.eps[k];
    }
    return sample;
}

ClosedFormReport iterated_equals_closed_check(const ImageGrid& x0, int t,
                                              const ScheduleTable& sched,
                                              const BMapStack& stack, int n_samples,
                                              RngStream& rng) {
    ClosedFormReport report;
    if (n_samples <= 0) {
        report.error = "n_samples must be positive";
        return report;
    }
    if (x0.height() > 16 || x0.width() > 16 || t > 64) {
        throw ParameterError("iterated_equals_closed_check: limited to grids <= 16x16, t <= 64");
    }
    require_timestep(t, sched.T, "iterated_equals_closed_check");
    require_stack_shape(x0, stack, "iterated_equals_closed_check");

    const std::size_t npix = x0.size();
    // Samples are split into fixed blocks; each block accumulates in sample
    // order and blocks merge in index order, so the totals do not depend on
    // how many threads ran.
    const int n_blocks = 64;
    struct Acc {
        std::vector<double> sum_it, sq_it, sum_cl, sq_cl;
    };
    std::vector<Acc> blocks(n_blocks);
    const RngStream base_it = rng.child(1);
    const RngStream base_cl = rng.child(2);

#pragma omp parallel for schedule(static)
    for (int b = 0; b < n_blocks; ++b) {
        Acc& acc = blocks[b];
        acc.sum_it.assign(npix, 0.0);
        acc.sq_it.assign(npix, 0.0);
        acc.sum_cl.assign(npix, 0.0);
        acc.sq_cl.assign(npix, 0.0);
        for (int s = b; s < n_samples; s += n_blocks) {
            RngStream rit = base_it.child(static_cast<std::uint64_t>(s));
            ImageGrid x = x0;
            for (int step = 1; step <= t; ++step) x = forward_step(x, step, sched, stack, rit);
            RngStream rcl = base_cl.child(static_cast<std::uint64_t>(s));
            const ForwardSample closed = forward_closed(x0, t, sched, stack, rcl);
            for (std::size_t k = 0; k < npix; ++k) {
                acc.sum_it[k] += x[k];
                acc.sq_it[k] += x[k] * x[k];
                acc.sum_cl[k] += closed.x_t[k];
                acc.sq_cl[k] += closed.x_t[k] * closed.x_t[k];
            }
        }
    }

    std::vector<double> sum_it(npix, 0.0), sq_it(npix, 0.0), sum_cl(npix, 0.0), sq_cl(npix, 0.0);
    for (const Acc& acc : blocks) {
        for (std::size_t k = 0; k < npix; ++k) {
            sum_it[k] += acc.sum_it[k];
            sq_it[k] += acc.sq_it[k];
            sum_cl[k] += acc.sum_cl[k];
            sq_cl[k] += acc.sq_cl[k];
        }
    }

    const double n = static_cast<double>(n_samples);
    report.ok = true;
    for (std::size_t k = 0; k < npix; ++k) {
        const double m_it = sum_it[k] / n;
        const double m_cl = sum_cl[k] / n;
        const double v_it = std::max(0.0, sq_it[k] / n - m_it * m_it) * n / (n - 1.0);
        const double v_cl = std::max(0.0, sq_cl[k] / n - m_cl * m_cl) * n / (n - 1.0);

        const double mean_gap = std::abs(m_it - m_cl);
        const double mean_tol = 3.0 * std::sqrt((v_it + v_cl) / n);
        const double var_gap = std::abs(v_it - v_cl);
        // Var of a Gaussian sample variance is ~ 2 v^2 / (n-1).
        const double var_tol =
            3.0 * std::sqrt(2.0 * (v_it * v_it + v_cl * v_cl) / (n - 1.0));

        report.max_mean_gap = std::max(report.max_mean_gap, mean_gap);
        report.max_var_gap = std::max(report.max_var_gap, var_gap);
        report.max_mean_gap_over_tol =
            std::max(report.max_mean_gap_over_tol, mean_gap / mean_tol);
        report.max_var_gap_over_tol = std::max(report.max_var_gap_over_tol, var_gap / var_tol);
        if (mean_gap > mean_tol || var_gap > var_tol) report.ok = false;
    }
    return report;
}

ScalarMoments posterior_moments_scalar(double x_t, double x0, double a_step,
                                       double a_prev_bar) {
    const double denom = 1.0 - a_step * a_prev_bar;
    ScalarMoments out;
    out.mu = (std::sqrt(a_step) * (1.0 - a_prev_bar) * x_t +
              std::sqrt(a_prev_bar) * (1.0 - a_step) * x0) /
             denom;
    out.sigma2 = (1.0 - a_step) * (1.0 - a_prev_bar) / denom;
    return out;
}

PosteriorParams posterior_params(const ImageGrid& x_t, const ImageGrid& x0_hat, int t,
                                 const ScheduleTable& sched, const BMapStack& stack) {
    if (t < 2 || t > sched.T) {
        throw IndexError("posterior_params: t must lie in 2..T (t=1 is the final-step rule)");
    }
    require_stack_shape(x_t, stack, "posterior_params");
    require_same_shape(x_t, x0_hat, "posterior_params");

    const ImageGrid& b_t = stack.B_at(t);
    const ImageGrid& prev_coeff = stack.coeff_at(t - 1);
    const ImageGrid& cur_coeff = stack.coeff_at(t);
    const double alpha_t = sched.alpha_at(t);

    PosteriorParams out;
    out.mu = ImageGrid(x_t.height(), x_t.width());
    out.sigma2 = ImageGrid(x_t.height(), x_t.width());
    const std::int64_t n = static_cast<std::int64_t>(x_t.size());
    bool degenerate = false;
#pragma omp parallel for schedule(static) reduction(|| : degenerate)
    for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t k = static_cast<std::size_t>(i);
        const double a_step = alpha_t * b_t[k];
        const double a_prev = prev_coeff[k];
        const double denom = 1.0 - cur_coeff[k];
        if (denom < kCoeffFloor) {
            degenerate = true;
            continue;
        }
        out.mu[k] = (std::sqrt(a_step) * (1.0 - a_prev) * x_t[k] +
                     std::sqrt(a_prev) * (1.0 - a_step) * x0_hat[k]) /
                    denom;
        out.sigma2[k] = (1.0 - a_step) * (1.0 - a_prev) / denom;
    }
    if (degenerate) {
        throw NumericDegenerateError(
            "posterior_params: 1 - alpha_bar_t*B_bar_t below 1e-12 at some pixel");
    }
    return out;
}

ScalarMoments posterior_bayes_oracle(double x_t, double x0, double a_step,
                                     double a_prev_bar, int grid_points) {
    if (!(a_step > 0.0 && a_step < 1.0) || !(a_prev_bar > 0.0 && a_prev_bar < 1.0)) {
        throw ParameterError("posterior_bayes_oracle: coefficients must lie in (0,1)");
    }
    if (grid_points < 4001) grid_points = 4001;

    const double lo = -8.0, hi = 8.0;
    const double dx = (hi - lo) / (grid_points - 1);
    const double var_like = 1.0 - a_step;       // x_t | x_{t-1}
    const double var_prior = 1.0 - a_prev_bar;  // x_{t-1} | x_0
    const double sq_a = std::sqrt(a_step);
    const double prior_mean = std::sqrt(a_prev_bar) * x0;

    double w_sum = 0.0, wx_sum = 0.0;
    for (int i = 0; i < grid_points; ++i) {
        const double x = lo + i * dx;
        const double d1 = x_t - sq_a * x;
        const double d2 = x - prior_mean;
        // Unnormalized product of the two Gaussian densities; the shared
        // normalization cancels in the moment ratios.
        const double w = std::exp(-0.5 * (d1 * d1 / var_like + d2 * d2 / var_prior));
        w_sum += w;
        wx_sum += w * x;
    }
    const double mean = wx_sum / w_sum;
    double wv_sum = 0.0;
    for (int i = 0; i < grid_points; ++i) {
        const double x = lo + i * dx;
        const double d1 = x_t - sq_a * x;
        const double d2 = x - prior_mean;
        const double w = std::exp(-0.5 * (d1 * d1 / var_like + d2 * d2 / var_prior));
        wv_sum += w * (x - mean) * (x - mean);
    }
    return {mean, wv_sum / w_sum};
}

ImageGrid predict_x0_from_eps(const ImageGrid& x_t, const ImageGrid& eps_hat, int t,
                              const ScheduleTable& sched, const BMapStack& stack) {
    require_timestep(t, sched.T, "predict_x0_from_eps");
    require_stack_shape(x_t, stack, "predict_x0_from_eps");
    require_same_shape(x_t, eps_hat, "predict_x0_from_eps");
    const ImageGrid& coeff = stack.coeff_at(t);
    ImageGrid out(x_t.height(), x_t.width());
    const std::int64_t n = static_cast<std::int64_t>(x_t.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t k = static_cast<std::size_t>(i);
        const double c = coeff[k];
        if (c <= kCoeffFloor) {
            out[k] = 0.0;  // no recoverable signal; fall back to the prior mean
            continue;
        }
        const double x0 = (x_t[k] - std::sqrt(1.0 - c) * eps_hat[k]) / std::sqrt(c);
        out[k] = std::clamp(x0, -1.0, 1.0);
    }
    return out;
}

ImageGrid ancestral_sample(const EpsPredictor& denoiser, const ScheduleTable& sched,
                           const BMapStack& stack, RngStream& rng,
                           const SampleObserver& observer) {
    ImageGrid x = gaussian_field(rng, stack.height(), stack.width());
    for (int t = sched.T; t >= 2; --t) {
        const ImageGrid eps_hat = denoiser(x, t);
        const ImageGrid x0_hat = predict_x0_from_eps(x, eps_hat, t, sched, stack);
        const PosteriorParams post = posterior_params(x, x0_hat, t, sched, stack);
        const ImageGrid z = gaussian_field(rng, x.height(), x.width());
        const std::int64_t n = static_cast<std::int64_t>(x.size());
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) {
            const std::size_t k = static_cast<std::size_t>(i);
            x[k] = post.mu[k] + std::sqrt(post.sigma2[k]) * z[k];
        }
        if (observer) observer(t - 1, x);
    }
    // Final step: the t=1 posterior mean collapses to the x0 estimate, so no
    // noise is added.
    const ImageGrid eps_hat = denoiser(x, 1);
    x = predict_x0_from_eps(x, eps_hat, 1, sched, stack);
    x = grid_clamp(x, -1.0, 1.0);
    if (observer) observer(0, x);
    return x;
}

TrainingPair training_pair(const ImageGrid& x0, const ScheduleTable& sched,
                           const BMapStack& stack, RngStream& rng) {
    TrainingPair pair;
    pair.t = 1 + static_cast<int>(rng.next_index(static_cast<std::uint64_t>(sched.T)));
    ForwardSample sample = forward_closed(x0, pair.t, sched, stack, rng);
    pair.x_t = std::move(sample.x_t);
    pair.target_eps = std::move(sample.eps);
    return pair;
}

}  // namespace usdiff
