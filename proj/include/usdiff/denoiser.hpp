#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "usdiff/diffusion.hpp"
#include "usdiff/grid.hpp"
#include "usdiff/schedule.hpp"

namespace usdiff {

// Small eps-prediction network:
//
//   input  = [x_t, depth]            depth[r][c] = r/(H-1), a fixed channel
//   h1     = conv3x3(input) + b1 + emb[t]   (per-channel timestep bias)
//   h2     = conv3x3(silu(h1)) + b2
//   h3     = conv3x3(silu(h2)) + b3
//   output = conv3x3(silu(h3)) + b4        (final layer zero-initialized)
//
// The depth channel gives the otherwise translation-equivariant stack access
// to absolute depth, which the data distribution depends on. Weights are
// drawn from a normal with std 1/sqrt(fan_in); biases and the embedding
// table start at zero. All parameters live in one flat vector with a fixed
// layout, which keeps the optimizer, checkpointing and finite-difference
// probes trivial.
class DenoiserParams {
public:
    DenoiserParams() = default;
    DenoiserParams(int height, int width, int hidden, int T);

    int height() const { return height_; }
    int width() const { return width_; }
    int hidden() const { return hidden_; }
    int timesteps() const { return T_; }
    std::size_t param_count() const { return flat_.size(); }

    std::vector<double>& flat() { return flat_; }
    const std::vector<double>& flat() const { return flat_; }

    std::span<double> w1() { return view(off_w1_, static_cast<std::size_t>(hidden_) * 2 * 9); }
    std::span<double> b1() { return view(off_b1_, static_cast<std::size_t>(hidden_)); }
    std::span<double> emb() { return view(off_emb_, static_cast<std::size_t>(T_) * hidden_); }
    std::span<double> w2() { return view(off_w2_, sq9()); }
    std::span<double> b2() { return view(off_b2_, static_cast<std::size_t>(hidden_)); }
    std::span<double> w3() { return view(off_w3_, sq9()); }
    std::span<double> b3() { return view(off_b3_, static_cast<std::size_t>(hidden_)); }
    std::span<double> w4() { return view(off_w4_, static_cast<std::size_t>(hidden_) * 9); }
    std::span<double> b4() { return view(off_b4_, 1); }

    std::span<const double> w1() const { return cview(off_w1_, static_cast<std::size_t>(hidden_) * 2 * 9); }
    std::span<const double> b1() const { return cview(off_b1_, static_cast<std::size_t>(hidden_)); }
    std::span<const double> emb() const { return cview(off_emb_, static_cast<std::size_t>(T_) * hidden_); }
    std::span<const double> w2() const { return cview(off_w2_, sq9()); }
    std::span<const double> b2() const { return cview(off_b2_, static_cast<std::size_t>(hidden_)); }
    std::span<const double> w3() const { return cview(off_w3_, sq9()); }
    std::span<const double> b3() const { return cview(off_b3_, static_cast<std::size_t>(hidden_)); }
    std::span<const double> w4() const { return cview(off_w4_, static_cast<std::size_t>(hidden_) * 9); }
    std::span<const double> b4() const { return cview(off_b4_, 1); }

    struct TensorInfo {
        std::string name;
        std::vector<int> shape;
        std::size_t offset;
        std::size_t count;
    };
    // Fixed serialization order for checkpoints and manifests.
    std::vector<TensorInfo> tensors() const;

    bool same_layout(const DenoiserParams& other) const {
        return height_ == other.height_ && width_ == other.width_ &&
               hidden_ == other.hidden_ && T_ == other.T_;
    }

private:
    std::size_t sq9() const { return static_cast<std::size_t>(hidden_) * hidden_ * 9; }
    std::span<double> view(std::size_t off, std::size_t n) { return {flat_.data() + off, n}; }
    std::span<const double> cview(std::size_t off, std::size_t n) const {
        return {flat_.data() + off, n};
    }

    int height_ = 0, width_ = 0, hidden_ = 0, T_ = 0;
    std::size_t off_w1_ = 0, off_b1_ = 0, off_emb_ = 0, off_w2_ = 0, off_b2_ = 0;
    std::size_t off_w3_ = 0, off_b3_ = 0, off_w4_ = 0, off_b4_ = 0;
    std::vector<double> flat_;
};

DenoiserParams denoiser_init(int height, int width, int channels_hidden, int T,
                             std::uint64_t seed);

ImageGrid denoiser_forward(const DenoiserParams& params, const ImageGrid& x_t, int t);

struct LossAndGrads {
    double loss = 0.0;
    DenoiserParams grads;  // same layout as the parameters
};

// Mean over batch items and pixels of (eps_hat - target_eps)^2, with
// analytic reverse-mode gradients. Per-item gradients accumulate into the
// result in batch order, so the totals are reproducible bit-for-bit.
LossAndGrads loss_and_grads(const DenoiserParams& params,
                            const std::vector<TrainingPair>& batch);

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct OptimizerState {
    AdamConfig config;
    std::vector<double> m;  // first-moment accumulator
    std::vector<double> v;  // second-moment accumulator
    std::int64_t step = 0;

    static OptimizerState init(const DenoiserParams& params, const AdamConfig& config);
};

// Standard bias-corrected Adam update, in place.
void adam_step(DenoiserParams& params, const DenoiserParams& grads, OptimizerState& state);

struct TrainConfig {
    int T = 200;
    double eps_b = 0.04;
    AlphaKind alpha_kind = AlphaKind::Cosine;
    GammaKind gamma_kind = GammaKind::SquareRoot;
    std::optional<ConeSpec> cone;
    OutsideConeMode outside_mode = OutsideConeMode::Gamma;
    int batch_size = 4;
    int iterations = 2000;
    double lr = 1e-4;
    int hidden_channels = 8;
    std::uint64_t seed = 0;
};

struct TrainResult {
    DenoiserParams params;
    std::vector<double> loss_curve;  // one entry per iteration
    ScheduleTable sched;
    BMapStack stack;
};

// training_pair -> loss_and_grads -> adam_step, fully deterministic in the
// config. Throws if the dataset is empty or the loss leaves the reals.
TrainResult train(const TrainConfig& config, const std::vector<ImageGrid>& dataset);

}  // namespace usdiff
