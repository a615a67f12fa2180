#pragma once

#include <functional>
#include <string>

#include "usdiff/rng.hpp"
#include "usdiff/schedule.hpp"

namespace usdiff {

// One draw from the closed-form marginal q(x_t | x_0), keeping the exact
// noise field so x_t = sqrt(c)*x0 + sqrt(1-c)*eps is reconstructible and
// eps can serve as the training target.
struct ForwardSample {
    ImageGrid x_t;
    ImageGrid eps;
    int t = 0;
};

// Single ancestral step x_{t-1} -> x_t using the per-step product
// alpha_t * B_t (not the cumulative one).
ImageGrid forward_step(const ImageGrid& x_prev, int t, const ScheduleTable& sched,
                       const BMapStack& stack, RngStream& rng);

// Single-shot sample of q(x_t | x_0) via the cumulative per-pixel
// coefficient alpha_bar_t * B_bar_t.
ForwardSample forward_closed(const ImageGrid& x0, int t, const ScheduleTable& sched,
                             const BMapStack& stack, RngStream& rng);

// Monte-Carlo comparison of t chained forward_steps against forward_closed.
// Gaps are reported both raw and normalized by their 3-standard-error
// tolerance; ok means every pixel stayed within tolerance.
struct ClosedFormReport {
    bool ok = false;
    std::string error;
    double max_mean_gap = 0.0;
    double max_var_gap = 0.0;
    double max_mean_gap_over_tol = 0.0;  // worst |mean gap| / (3 SE)
    double max_var_gap_over_tol = 0.0;   // worst |var gap| / (3 SE)
};

ClosedFormReport iterated_equals_closed_check(const ImageGrid& x0, int t,
                                              const ScheduleTable& sched,
                                              const BMapStack& stack, int n_samples,
                                              RngStream& rng);

// Mean and per-pixel variance of q(x_{t-1} | x_t, x_0).
struct PosteriorParams {
    ImageGrid mu;
    ImageGrid sigma2;
};

// Scalar core of the posterior: a_step = alpha_t*B_t at the pixel,
// a_prev_bar = alpha_bar_{t-1}*B_bar_{t-1} at the pixel.
//   mu     = [sqrt(a_step)(1-a_prev_bar) x_t + sqrt(a_prev_bar)(1-a_step) x0] / (1 - a_step*a_prev_bar)
//   sigma2 = (1-a_step)(1-a_prev_bar) / (1 - a_step*a_prev_bar)
struct ScalarMoments {
    double mu = 0.0;
    double sigma2 = 0.0;
};

ScalarMoments posterior_moments_scalar(double x_t, double x0, double a_step,
                                       double a_prev_bar);

PosteriorParams posterior_params(const ImageGrid& x_t, const ImageGrid& x0_hat, int t,
                                 const ScheduleTable& sched, const BMapStack& stack);

// Independent check of the posterior formulas: numerically integrates the
// product of the two forward Gaussian densities on a fine grid over [-8, 8]
// and reports the empirical mean/variance. Shares no code with
// posterior_moments_scalar.
ScalarMoments posterior_bayes_oracle(double x_t, double x0, double a_step,
                                     double a_prev_bar, int grid_points = 8001);

// Inverts the closed-form marginal: x0_hat = (x_t - sqrt(1-c) eps_hat)/sqrt(c),
// clamped to [-1,1]. Pixels whose coefficient has collapsed below 1e-12
// carry no signal and return the prior mean 0.
ImageGrid predict_x0_from_eps(const ImageGrid& x_t, const ImageGrid& eps_hat, int t,
                              const ScheduleTable& sched, const BMapStack& stack);

using EpsPredictor = std::function<ImageGrid(const ImageGrid& x_t, int t)>;
// Called after each reverse step with (t-1, state); t=0 carries the final image.
using SampleObserver = std::function<void(int t, const ImageGrid& state)>;

// Ancestral sampling from pure noise down to t=0. The final step returns the
// posterior mean without added noise; output is clamped to [-1,1].
ImageGrid ancestral_sample(const EpsPredictor& denoiser, const ScheduleTable& sched,
                           const BMapStack& stack, RngStream& rng,
                           const SampleObserver& observer = nullptr);

struct TrainingPair {
    int t = 0;
    ImageGrid x_t;
    ImageGrid target_eps;
};

// t uniform on {1..T}, then one closed-form draw; target is the exact noise.
TrainingPair training_pair(const ImageGrid& x0, const ScheduleTable& sched,
                           const BMapStack& stack, RngStream& rng);

}  // namespace usdiff
