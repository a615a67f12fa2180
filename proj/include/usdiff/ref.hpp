#pragma once

#include "usdiff/denoiser.hpp"
#include "usdiff/diffusion.hpp"
#include "usdiff/rng.hpp"
#include "usdiff/schedule.hpp"

// Serial reference implementations. Each function computes the same
// per-element expressions as its OpenMP counterpart, in plain loops, so the
// pair must agree bit-for-bit; tests assert exactly that, and the benchmark
// tool times one against the other.
//
// The ddpm_* functions are a separate thing: an independent standard-DDPM
// path (no B-maps anywhere) used as the baseline the B-map machinery must
// reduce to as eps_b -> 0.
namespace usdiff::ref {

ImageGrid gaussian_field(RngStream& rng, int height, int width);

void conv3x3_forward(const double* in, int cin, const double* w, const double* bias,
                     double* out, int cout, int H, int W);
void conv3x3_backward_input(const double* dout, int cout, const double* w, int cin,
                            double* din, int H, int W);
void conv3x3_backward_weights(const double* dout, int cout, const double* in, int cin,
                              double* dw, double* db, int H, int W);
void silu_forward(const double* in, double* out, std::size_t n);
void silu_backward(const double* dout, const double* in, double* din, std::size_t n);

ImageGrid forward_closed_xt(const ImageGrid& x0, const ImageGrid& coeff,
                            const ImageGrid& eps);

double ssim(const ImageGrid& a, const ImageGrid& b);

// --- standard DDPM baseline (B identically 1) ---

ForwardSample ddpm_forward_closed(const ImageGrid& x0, int t, const ScheduleTable& sched,
                                  RngStream& rng);

PosteriorParams ddpm_posterior_params(const ImageGrid& x_t, const ImageGrid& x0_hat, int t,
                                      const ScheduleTable& sched);

ImageGrid ddpm_predict_x0_from_eps(const ImageGrid& x_t, const ImageGrid& eps_hat, int t,
                                   const ScheduleTable& sched);

// Mirrors usdiff::ancestral_sample step for step (same stream consumption
// order), with scalar schedule coefficients throughout.
ImageGrid ddpm_ancestral_sample(const EpsPredictor& denoiser, const ScheduleTable& sched,
                                int height, int width, RngStream& rng);

}  // namespace usdiff::ref
