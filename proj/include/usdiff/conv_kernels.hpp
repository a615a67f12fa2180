#pragma once

#include <cstddef>

namespace usdiff {

// 3x3 same-size convolution kernels on channels-major buffers:
// data[ch*(H*W) + r*W + c], weights w[((o*cin)+i)*9 + (dr+1)*3 + (dc+1)].
// Zero padding at the borders. Every output element is written by exactly
// one loop iteration, so the OpenMP versions are bit-identical to the
// serial references in usdiff::ref.

void conv3x3_forward(const double* in, int cin, const double* w, const double* bias,
                     double* out, int cout, int H, int W);

void conv3x3_backward_input(const double* dout, int cout, const double* w, int cin,
                            double* din, int H, int W);

// dw accumulates per weight over all pixels in row-major pixel order;
// db likewise per output channel.
void conv3x3_backward_weights(const double* dout, int cout, const double* in, int cin,
                              double* dw, double* db, int H, int W);

void silu_forward(const double* in, double* out, std::size_t n);

// din = dout * silu'(in)
void silu_backward(const double* dout, const double* in, double* din, std::size_t n);

}  // namespace usdiff
