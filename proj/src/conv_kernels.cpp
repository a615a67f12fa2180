#include "usdiff/conv_kernels.hpp"

#include <cmath>
#include <cstdint>

namespace usdiff {

void conv3x3_forward(const double* in, int cin, const double* w, const double* bias,
                     double* out, int cout, int H, int W) {
    const std::int64_t rows = static_cast<std::int64_t>(cout) * H;
#pragma omp parallel for schedule(static)
    for (std::int64_t orow = 0; orow < rows; ++orow) {
        const int o = static_cast<int>(orow / H);
        const int r = static_cast<int>(orow % H);
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

void conv3x3_backward_input(const double* dout, int cout, const double* w, int cin,
                            double* din, int H, int W) {
    const std::int64_t rows = static_cast<std::int64_t>(cin) * H;
#pragma omp parallel for schedule(static)
    for (std::int64_t irow = 0; irow < rows; ++irow) {
        const int i = static_cast<int>(irow / H);
        const int r = static_cast<int>(irow % H);
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

void conv3x3_backward_weights(const double* dout, int cout, const double* in, int cin,
                              double* dw, double* db, int H, int W) {
    const std::int64_t nw = static_cast<std::int64_t>(cout) * cin * 9;
#pragma omp parallel for schedule(static)
    for (std::int64_t widx = 0; widx < nw; ++widx) {
        const int o = static_cast<int>(widx / (cin * 9));
        const int i = static_cast<int>((widx / 9) % cin);
        const int k = static_cast<int>(widx % 9);
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
        dw[widx] += acc;
    }
#pragma omp parallel for schedule(static)
    for (int o = 0; o < cout; ++o) {
        const double* gplane = dout + static_cast<std::size_t>(o) * H * W;
        double acc = 0.0;
        for (int p = 0; p < H * W; ++p) acc += gplane[p];
        db[o] += acc;
    }
}

void silu_forward(const double* in, double* out, std::size_t n) {
    const std::int64_t m = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) {
        const double x = in[i];
        const double s = 1.0 / (1.0 + std::exp(-x));
        out[i] = x * s;
    }
}

void silu_backward(const double* dout, const double* in, double* din, std::size_t n) {
    const std::int64_t m = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) {
        const double x = in[i];
        const double s = 1.0 / (1.0 + std::exp(-x));
        din[i] = dout[i] * s * (1.0 + x * (1.0 - s));
    }
}

}  // namespace usdiff
