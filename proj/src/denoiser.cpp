#include "usdiff/denoiser.hpp"

#include <cmath>
#include <string>

#include "usdiff/conv_kernels.hpp"

namespace usdiff {

DenoiserParams::DenoiserParams(int height, int width, int hidden, int T) {
    if (height < 8 || width < 8) {
        throw DimensionError("DenoiserParams: dimensions must be >= 8x8");
    }
    if (hidden < 4) throw ParameterError("DenoiserParams: channels_hidden must be >= 4");
    if (T < 1) throw ParameterError("DenoiserParams: T must be >= 1");
    height_ = height;
    width_ = width;
    hidden_ = hidden;
    T_ = T;

    std::size_t off = 0;
    auto place = [&off](std::size_t n) {
        const std::size_t at = off;
        off += n;
        return at;
    };
    const std::size_t h = static_cast<std::size_t>(hidden);
    off_w1_ = place(h * 2 * 9);
    off_b1_ = place(h);
    off_emb_ = place(static_cast<std::size_t>(T) * h);
    off_w2_ = place(h * h * 9);
    off_b2_ = place(h);
    off_w3_ = place(h * h * 9);
    off_b3_ = place(h);
    off_w4_ = place(h * 9);
    off_b4_ = place(1);
    flat_.assign(off, 0.0);
}

std::vector<DenoiserParams::TensorInfo> DenoiserParams::tensors() const {
    const int h = hidden_;
    return {
        {"w1", {h, 2, 3, 3}, off_w1_, static_cast<std::size_t>(h) * 2 * 9},
        {"b1", {h}, off_b1_, static_cast<std::size_t>(h)},
        {"emb", {T_, h}, off_emb_, static_cast<std::size_t>(T_) * h},
        {"w2", {h, h, 3, 3}, off_w2_, sq9()},
        {"b2", {h}, off_b2_, static_cast<std::size_t>(h)},
        {"w3", {h, h, 3, 3}, off_w3_, sq9()},
        {"b3", {h}, off_b3_, static_cast<std::size_t>(h)},
        {"w4", {1, h, 3, 3}, off_w4_, static_cast<std::size_t>(h) * 9},
        {"b4", {1}, off_b4_, 1},
    };
}

DenoiserParams denoiser_init(int height, int width, int channels_hidden, int T,
                             std::uint64_t seed) {
    DenoiserParams params(height, width, channels_hidden, T);
    RngStream rng = RngStream(seed).child(0xD3);
    auto fill_fan_in = [&rng](std::span<double> w, int fan_in) {
        const double std = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (double& v : w) v = std * rng.next_gaussian();
    };
    fill_fan_in(params.w1(), 2 * 9);
    fill_fan_in(params.w2(), channels_hidden * 9);
    fill_fan_in(params.w3(), channels_hidden * 9);
    // w4/b4 stay zero so the untrained net predicts eps_hat == 0; biases and
    // the embedding table also start at zero.
    return params;
}

namespace {

// Activations kept for the backward pass.
struct ForwardTrace {
    std::vector<double> input;              // 2 channels
    std::vector<double> h1, a1, h2, a2, h3, a3;
    std::vector<double> out;                // 1 channel
};

void forward_trace(const DenoiserParams& p, const ImageGrid& x_t, int t, ForwardTrace& tr) {
    const int H = p.height(), W = p.width(), C = p.hidden();
    const std::size_t plane = static_cast<std::size_t>(H) * W;

    tr.input.resize(2 * plane);
    for (int r = 0; r < H; ++r) {
        const double depth = (H > 1) ? static_cast<double>(r) / (H - 1) : 0.0;
        for (int c = 0; c < W; ++c) {
            tr.input[r * W + c] = x_t.at(r, c);
            tr.input[plane + r * W + c] = depth;
        }
    }

    tr.h1.resize(C * plane);
    conv3x3_forward(tr.input.data(), 2, p.w1().data(), p.b1().data(), tr.h1.data(), C, H, W);
    const double* emb_t = p.emb().data() + static_cast<std::size_t>(t - 1) * C;
    for (int ch = 0; ch < C; ++ch) {
        double* row = tr.h1.data() + static_cast<std::size_t>(ch) * plane;
        const double e = emb_t[ch];
        for (std::size_t i = 0; i < plane; ++i) row[i] += e;
    }
    tr.a1.resize(C * plane);
    silu_forward(tr.h1.data(), tr.a1.data(), tr.h1.size());

    tr.h2.resize(C * plane);
    conv3x3_forward(tr.a1.data(), C, p.w2().data(), p.b2().data(), tr.h2.data(), C, H, W);
    tr.a2.resize(C * plane);
    silu_forward(tr.h2.data(), tr.a2.data(), tr.h2.size());

    tr.h3.resize(C * plane);
    conv3x3_forward(tr.a2.data(), C, p.w3().data(), p.b3().data(), tr.h3.data(), C, H, W);
    tr.a3.resize(C * plane);
    silu_forward(tr.h3.data(), tr.a3.data(), tr.h3.size());

    tr.out.resize(plane);
    conv3x3_forward(tr.a3.data(), C, p.w4().data(), p.b4().data(), tr.out.data(), 1, H, W);
}

// dOut -> parameter gradients, accumulated into g.
void backward_trace(const DenoiserParams& p, int t, const ForwardTrace& tr,
                    const std::vector<double>& dout, DenoiserParams& g) {
    const int H = p.height(), W = p.width(), C = p.hidden();
    const std::size_t plane = static_cast<std::size_t>(H) * W;

    conv3x3_backward_weights(dout.data(), 1, tr.a3.data(), C, g.w4().data(), g.b4().data(), H, W);
    std::vector<double> da3(C * plane);
    conv3x3_backward_input(dout.data(), 1, p.w4().data(), C, da3.data(), H, W);
    std::vector<double> dh3(C * plane);
    silu_backward(da3.data(), tr.h3.data(), dh3.data(), dh3.size());

    conv3x3_backward_weights(dh3.data(), C, tr.a2.data(), C, g.w3().data(), g.b3().data(), H, W);
    std::vector<double> da2(C * plane);
    conv3x3_backward_input(dh3.data(), C, p.w3().data(), C, da2.data(), H, W);
    std::vector<double> dh2(C * plane);
    silu_backward(da2.data(), tr.h2.data(), dh2.data(), dh2.size());

    conv3x3_backward_weights(dh2.data(), C, tr.a1.data(), C, g.w2().data(), g.b2().data(), H, W);
    std::vector<double> da1(C * plane);
    conv3x3_backward_input(dh2.data(), C, p.w2().data(), C, da1.data(), H, W);
    std::vector<double> dh1(C * plane);
    silu_backward(da1.data(), tr.h1.data(), dh1.data(), dh1.size());

    conv3x3_backward_weights(dh1.data(), C, tr.input.data(), 2, g.w1().data(), g.b1().data(), H, W);
    double* demb_t = g.emb().data() + static_cast<std::size_t>(t - 1) * C;
    for (int ch = 0; ch < C; ++ch) {
        const double* row = dh1.data() + static_cast<std::size_t>(ch) * plane;
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += row[i];
        demb_t[ch] += acc;
    }
    // Gradient w.r.t. the input image is not needed; the chain stops here.
}

}  // namespace

ImageGrid denoiser_forward(const DenoiserParams& params, const ImageGrid& x_t, int t) {
    if (x_t.height() != params.height() || x_t.width() != params.width()) {
        throw DimensionError("denoiser_forward: input does not match init dims");
    }
    if (t < 1 || t > params.timesteps()) {
        throw IndexError("denoiser_forward: timestep out of range");
    }
    ForwardTrace tr;
    forward_trace(params, x_t, t, tr);
    ImageGrid out(params.height(), params.width());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = tr.out[i];
    return out;
}

LossAndGrads loss_and_grads(const DenoiserParams& params,
                            const std::vector<TrainingPair>& batch) {
    if (batch.empty()) throw ParameterError("loss_and_grads: empty batch");
    const int H = params.height(), W = params.width();
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const double scale = 1.0 / (static_cast<double>(batch.size()) * plane);

    LossAndGrads result;
    result.grads = DenoiserParams(H, W, params.hidden(), params.timesteps());

    double loss = 0.0;
    ForwardTrace tr;
    std::vector<double> dout(plane);
    for (const TrainingPair& item : batch) {
        forward_trace(params, item.x_t, item.t, tr);
        for (std::size_t i = 0; i < plane; ++i) {
            const double diff = tr.out[i] - item.target_eps[i];
            loss += diff * diff * scale;
            dout[i] = 2.0 * diff * scale;
        }
        backward_trace(params, item.t, tr, dout, result.grads);
    }
    result.loss = loss;
    return result;
}

OptimizerState OptimizerState::init(const DenoiserParams& params, const AdamConfig& config) {
    OptimizerState state;
    state.config = config;
    state.m.assign(params.param_count(), 0.0);
    state.v.assign(params.param_count(), 0.0);
    state.step = 0;
    return state;
}

void adam_step(DenoiserParams& params, const DenoiserParams& grads, OptimizerState& state) {
    if (!params.same_layout(grads) || state.m.size() != params.param_count()) {
        throw DimensionError("adam_step: parameter/gradient/state shapes disagree");
    }
    state.step += 1;
    const AdamConfig& c = state.config;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    const std::int64_t n = static_cast<std::int64_t>(params.param_count());
    double* p = params.flat().data();
    const double* g = grads.flat().data();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g[i];
        state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g[i] * g[i];
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        p[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
}

TrainResult train(const TrainConfig& config, const std::vector<ImageGrid>& dataset) {
    if (dataset.empty()) throw ParameterError("train: empty dataset");
    const int H = dataset.front().height();
    const int W = dataset.front().width();
    for (const ImageGrid& img : dataset) {
        if (img.height() != H || img.width() != W) {
            throw DimensionError("train: dataset images must share one shape");
        }
    }

    TrainResult result;
    result.sched = alpha_schedule(config.alpha_kind, config.T);
    BMapSpec spec;
    spec.height = H;
    spec.width = W;
    spec.eps_b = config.eps_b;
    spec.gamma_kind = config.gamma_kind;
    spec.cone = config.cone;
    spec.outside_mode = config.outside_mode;
    result.stack = build_bmap_stack(result.sched, spec);

    result.params = denoiser_init(H, W, config.hidden_channels, config.T, config.seed);
    AdamConfig adam;
    adam.lr = config.lr;
    OptimizerState state = OptimizerState::init(result.params, adam);

    const RngStream root = RngStream(config.seed).child(0x7E);
    result.loss_curve.reserve(static_cast<std::size_t>(config.iterations));
    std::vector<TrainingPair> batch(static_cast<std::size_t>(config.batch_size));
    for (int iter = 0; iter < config.iterations; ++iter) {
        const RngStream iter_stream = root.child(static_cast<std::uint64_t>(iter));
        for (int item = 0; item < config.batch_size; ++item) {
            RngStream s = iter_stream.child(static_cast<std::uint64_t>(item));
            const std::size_t idx =
                static_cast<std::size_t>(s.next_index(dataset.size()));
            batch[static_cast<std::size_t>(item)] =
                training_pair(dataset[idx], result.sched, result.stack, s);
        }
        LossAndGrads lg = loss_and_grads(result.params, batch);
        if (!std::isfinite(lg.loss)) {
            throw NumericDegenerateError("train: non-finite loss at iteration " +
                                         std::to_string(iter));
        }
        adam_step(result.params, lg.grads, state);
        result.loss_curve.push_back(lg.loss);
    }
    return result;
}

}  // namespace usdiff
