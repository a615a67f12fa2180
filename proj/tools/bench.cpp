// Times the OpenMP kernels against their serial references on large inputs
// and checks that the two produce identical bits.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "usdiff/conv_kernels.hpp"
#include "usdiff/denoiser.hpp"
#include "usdiff/diffusion.hpp"
#include "usdiff/metrics.hpp"
#include "usdiff/ref.hpp"
#include "usdiff/rng.hpp"

using namespace usdiff;

namespace {

double time_ms(const std::function<void()>& fn, int repeats) {
    fn();  // warm-up
    const auto begin = std::chrono::steady_clock::now();
    for (int i = 0; i < repeats; ++i) fn();
    const auto end = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(end - begin).count() / repeats;
}

void report(const std::string& name, double serial_ms, double parallel_ms, bool identical) {
    std::printf("%-28s serial %9.3f ms   omp %9.3f ms   speedup %5.2fx   bits %s\n",
                name.c_str(), serial_ms, parallel_ms, serial_ms / parallel_ms,
                identical ? "identical" : "DIFFER");
}

bool grids_identical(const ImageGrid& a, const ImageGrid& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) return false;
    }
    return true;
}

bool buffers_identical(const std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) return false;
    }
    return true;
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads %d\n\n", omp_get_max_threads());
#else
    std::printf("Built without OpenMP; both columns run serially\n\n");
#endif

    {
        const int H = 2048, W = 2048;
        RngStream r1(7), r2(7);
        ImageGrid out_omp, out_ref;
        const double t_omp = time_ms(
            [&] {
                RngStream r = r1.child(1);
                out_omp = gaussian_field(r, H, W);
            },
            3);
        const double t_ref = time_ms(
            [&] {
                RngStream r = r2.child(1);
                out_ref = ref::gaussian_field(r, H, W);
            },
            3);
        report("gaussian_field 2048^2", t_ref, t_omp, grids_identical(out_omp, out_ref));
    }

    {
        const int H = 256, W = 256, Cin = 16, Cout = 16;
        RngStream rng(11);
        std::vector<double> in(static_cast<std::size_t>(Cin) * H * W);
        std::vector<double> w(static_cast<std::size_t>(Cout) * Cin * 9);
        std::vector<double> bias(Cout);
        for (double& v : in) v = rng.next_gaussian();
        for (double& v : w) v = 0.05 * rng.next_gaussian();
        for (double& v : bias) v = 0.01 * rng.next_gaussian();

        std::vector<double> out_omp(static_cast<std::size_t>(Cout) * H * W);
        std::vector<double> out_ref(out_omp.size());
        const double t_omp = time_ms(
            [&] { conv3x3_forward(in.data(), Cin, w.data(), bias.data(), out_omp.data(), Cout, H, W); },
            5);
        const double t_ref = time_ms(
            [&] {
                ref::conv3x3_forward(in.data(), Cin, w.data(), bias.data(), out_ref.data(), Cout, H,
                                     W);
            },
            5);
        report("conv3x3 forward 256^2 c16", t_ref, t_omp, buffers_identical(out_omp, out_ref));

        std::vector<double> dw_omp(w.size(), 0.0), dw_ref(w.size(), 0.0);
        std::vector<double> db_omp(bias.size(), 0.0), db_ref(bias.size(), 0.0);
        const double tb_omp = time_ms(
            [&] {
                std::fill(dw_omp.begin(), dw_omp.end(), 0.0);
                std::fill(db_omp.begin(), db_omp.end(), 0.0);
                conv3x3_backward_weights(out_omp.data(), Cout, in.data(), Cin, dw_omp.data(),
                                         db_omp.data(), H, W);
            },
            5);
        const double tb_ref = time_ms(
            [&] {
                std::fill(dw_ref.begin(), dw_ref.end(), 0.0);
                std::fill(db_ref.begin(), db_ref.end(), 0.0);
                ref::conv3x3_backward_weights(out_ref.data(), Cout, in.data(), Cin, dw_ref.data(),
                                              db_ref.data(), H, W);
            },
            5);
        report("conv3x3 dweights 256^2 c16", tb_ref, tb_omp,
               buffers_identical(dw_omp, dw_ref) && buffers_identical(db_omp, db_ref));
    }

    {
        const int H = 512, W = 512, T = 100;
        const ScheduleTable sched = alpha_schedule(AlphaKind::Cosine, T);
        BMapSpec spec;
        spec.height = H;
        spec.width = W;
        spec.eps_b = 0.04;
        const BMapStack stack = build_bmap_stack(sched, spec);
        RngStream rng(3);
        ImageGrid x0(H, W);
        for (std::size_t i = 0; i < x0.size(); ++i) x0[i] = 2.0 * rng.next_unit() - 1.0;

        RngStream ro(5), rr(5);
        ForwardSample s_omp, s_ref_eps;
        ImageGrid xt_ref;
        const double t_omp = time_ms(
            [&] {
                RngStream r = ro.child(2);
                s_omp = forward_closed(x0, T, sched, stack, r);
            },
            5);
        const double t_ref = time_ms(
            [&] {
                RngStream r = rr.child(2);
                const ImageGrid eps = ref::gaussian_field(r, H, W);
                xt_ref = ref::forward_closed_xt(x0, stack.coeff_at(T), eps);
            },
            5);
        report("forward_closed 512^2", t_ref, t_omp, grids_identical(s_omp.x_t, xt_ref));
    }

    {
        const int H = 1024, W = 1024;
        RngStream rng(13);
        ImageGrid a(H, W), b(H, W);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = rng.next_unit();
            b[i] = 0.8 * a[i] + 0.2 * rng.next_unit();
        }
        double v_omp = 0.0, v_ref = 0.0;
        const double t_omp = time_ms([&] { v_omp = ssim(a, b); }, 3);
        const double t_ref = time_ms([&] { v_ref = ref::ssim(a, b); }, 3);
        report("ssim 1024^2", t_ref, t_omp, v_omp == v_ref);
    }

    return 0;
}
