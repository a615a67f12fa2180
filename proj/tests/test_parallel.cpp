// The OpenMP kernels write each output element from exactly one iteration
// and keep reductions in a fixed order, so they must agree with the serial
// references to the last bit. These tests pin that contract.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "testutil.hpp"
#include "usdiff/conv_kernels.hpp"
#include "usdiff/denoiser.hpp"
#include "usdiff/diffusion.hpp"
#include "usdiff/metrics.hpp"
#include "usdiff/ref.hpp"

using namespace usdiff;

TEST_CASE("gaussian fields: parallel fill equals serial fill bitwise") {
    for (std::uint64_t seed : {1ull, 99ull, 12345ull}) {
        RngStream a = RngStream(seed).child(0);
        RngStream b = RngStream(seed).child(0);
        const ImageGrid omp_field = gaussian_field(a, 33, 17);
        const ImageGrid ref_field = ref::gaussian_field(b, 33, 17);
        CHECK(testutil::bit_identical(omp_field, ref_field));
        CHECK(a.counter() == b.counter());
    }
}

TEST_CASE("conv kernels match their serial references bitwise") {
    const int H = 19, W = 23, Cin = 3, Cout = 5;
    RngStream rng(7);
    std::vector<double> in(static_cast<std::size_t>(Cin) * H * W);
    std::vector<double> w(static_cast<std::size_t>(Cout) * Cin * 9);
    std::vector<double> bias(Cout);
    std::vector<double> dout(static_cast<std::size_t>(Cout) * H * W);
    for (double& v : in) v = rng.next_gaussian();
    for (double& v : w) v = rng.next_gaussian();
    for (double& v : bias) v = rng.next_gaussian();
    for (double& v : dout) v = rng.next_gaussian();

    std::vector<double> out_a(static_cast<std::size_t>(Cout) * H * W);
    std::vector<double> out_b(out_a.size());
    conv3x3_forward(in.data(), Cin, w.data(), bias.data(), out_a.data(), Cout, H, W);
    ref::conv3x3_forward(in.data(), Cin, w.data(), bias.data(), out_b.data(), Cout, H, W);
    CHECK(out_a == out_b);

    std::vector<double> din_a(in.size()), din_b(in.size());
    conv3x3_backward_input(dout.data(), Cout, w.data(), Cin, din_a.data(), H, W);
    ref::conv3x3_backward_input(dout.data(), Cout, w.data(), Cin, din_b.data(), H, W);
    CHECK(din_a == din_b);

    std::vector<double> dw_a(w.size(), 0.0), dw_b(w.size(), 0.0);
    std::vector<double> db_a(bias.size(), 0.0), db_b(bias.size(), 0.0);
    conv3x3_backward_weights(dout.data(), Cout, in.data(), Cin, dw_a.data(), db_a.data(), H, W);
    ref::conv3x3_backward_weights(dout.data(), Cout, in.data(), Cin, dw_b.data(), db_b.data(), H,
                                  W);
    CHECK(dw_a == dw_b);
    CHECK(db_a == db_b);
}

TEST_CASE("silu kernels match bitwise") {
    RngStream rng(8);
    std::vector<double> in(999), dout(999);
    for (double& v : in) v = 4.0 * rng.next_gaussian();
    for (double& v : dout) v = rng.next_gaussian();

    std::vector<double> out_a(in.size()), out_b(in.size());
    silu_forward(in.data(), out_a.data(), in.size());
    ref::silu_forward(in.data(), out_b.data(), in.size());
    CHECK(out_a == out_b);

    std::vector<double> din_a(in.size()), din_b(in.size());
    silu_backward(dout.data(), in.data(), din_a.data(), in.size());
    ref::silu_backward(dout.data(), in.data(), din_b.data(), in.size());
    CHECK(din_a == din_b);
}

TEST_CASE("forward_closed matches the serial recombination bitwise") {
    const ScheduleTable sched = alpha_schedule(AlphaKind::Cosine, 30);
    BMapSpec spec;
    spec.height = 14;
    spec.width = 11;
    spec.eps_b = 0.2;
    const BMapStack stack = build_bmap_stack(sched, spec);
    RngStream grid_rng(9);
    const ImageGrid x0 = testutil::random_grid(grid_rng, 14, 11);

    RngStream a = RngStream(10).child(4);
    RngStream b = RngStream(10).child(4);
    const ForwardSample sample = forward_closed(x0, 15, sched, stack, a);
    const ImageGrid eps = ref::gaussian_field(b, 14, 11);
    const ImageGrid expected = ref::forward_closed_xt(x0, stack.coeff_at(15), eps);
    CHECK(testutil::bit_identical(sample.x_t, expected));
    CHECK(testutil::bit_identical(sample.eps, eps));
}

TEST_CASE("ssim matches the serial reference bitwise") {
    RngStream rng(11);
    const ImageGrid a = testutil::random_grid(rng, 40, 37, 0.0, 1.0);
    ImageGrid b = a;
    const ImageGrid noise = gaussian_field(rng, 40, 37);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += 0.05 * noise[i];
    CHECK(ssim(a, b) == ref::ssim(a, b));
}

TEST_CASE("denoiser forward is reproducible under repeated evaluation") {
    DenoiserParams p = denoiser_init(16, 16, 8, 10, 12);
    RngStream rng(13);
    for (double& v : p.w4()) v = 0.1 * rng.next_gaussian();
    const ImageGrid x = testutil::random_grid(rng, 16, 16);
    const ImageGrid first = denoiser_forward(p, x, 3);
    for (int i = 0; i < 5; ++i) {
        CHECK(testutil::bit_identical(first, denoiser_forward(p, x, 3)));
    }
}

TEST_CASE("batch gradients accumulate in a fixed order") {
    DenoiserParams p = denoiser_init(16, 16, 6, 10, 14);
    RngStream rng(15);
    for (double& v : p.w4()) v = 0.1 * rng.next_gaussian();
    std::vector<TrainingPair> batch(3);
    for (int i = 0; i < 3; ++i) {
        RngStream s = RngStream(16).child(static_cast<std::uint64_t>(i));
        batch[static_cast<std::size_t>(i)].t = 1 + static_cast<int>(s.next_index(10));
        batch[static_cast<std::size_t>(i)].x_t = gaussian_field(s, 16, 16);
        batch[static_cast<std::size_t>(i)].target_eps = gaussian_field(s, 16, 16);
    }
    const LossAndGrads first = loss_and_grads(p, batch);
    const LossAndGrads second = loss_and_grads(p, batch);
    CHECK(first.loss == second.loss);
    CHECK(first.grads.flat() == second.grads.flat());
}
