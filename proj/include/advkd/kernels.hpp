#pragma once

#include "advkd/tensor.hpp"

// Compute kernels for the conv/norm/resampling inner loops.
//
// advkd::kernels holds the OpenMP-parallel implementations used by the
// models. advkd::kernels::ref holds serial reference implementations with
// identical accumulation order; the test suite checks the two lanes produce
// bit-identical results and tools/bench_kernels compares their throughput.
// Parallel loops assign each output element to exactly one thread and
// accumulate in a fixed serial order, so results do not depend on the
// thread count.

namespace advkd::kernels {

// x: (N,Cin,H,W), w: (Cout,Cin,Kh,Kw), b: (Cout) or undefined.
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                      int stride, int pad);
Tensor conv2d_backward_input(const Tensor& gy, const Tensor& w,
                             int stride, int pad, int in_h, int in_w);
// Returns grad_w; adds grad_b into *gb when gb is non-null.
Tensor conv2d_backward_weight(const Tensor& gy, const Tensor& x,
                              int kh, int kw, int stride, int pad, Tensor* gb);

// x: (N,Din), w: (Dout,Din), b: (Dout) or undefined.
Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor linear_backward(const Tensor& gy, const Tensor& x, const Tensor& w,
                       Tensor* gw, Tensor* gb);

// Batch statistics are computed per channel over (N,H,W). Normalization
// uses the biased variance.
Tensor batchnorm_forward_train(const Tensor& x, const Tensor& gamma,
                               const Tensor& beta, float eps,
                               Tensor& save_mean, Tensor& save_invstd);
Tensor batchnorm_forward_eval(const Tensor& x, const Tensor& gamma,
                              const Tensor& beta, const Tensor& rmean,
                              const Tensor& rvar, float eps);
Tensor batchnorm_backward(const Tensor& gy, const Tensor& x,
                          const Tensor& gamma, const Tensor& save_mean,
                          const Tensor& save_invstd, Tensor* ggamma,
                          Tensor* gbeta);

Tensor leaky_relu_forward(const Tensor& x, float slope);
Tensor leaky_relu_backward(const Tensor& gy, const Tensor& x, float slope);
Tensor tanh_forward(const Tensor& x);
Tensor tanh_backward(const Tensor& gy, const Tensor& y);
Tensor silu_forward(const Tensor& x);
Tensor silu_backward(const Tensor& gy, const Tensor& x);

// Nearest-neighbor 2x on (N,C,H,W).
Tensor upsample2x_forward(const Tensor& x);
Tensor upsample2x_backward(const Tensor& gy);

// Area-average pooling by an integer factor on (C,H,W) or (N,C,H,W).
Tensor avgpool_forward(const Tensor& x, int factor);

}  // namespace advkd::kernels

namespace advkd::kernels::ref {

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                      int stride, int pad);
Tensor conv2d_backward_input(const Tensor& gy, const Tensor& w,
                             int stride, int pad, int in_h, int in_w);
Tensor conv2d_backward_weight(const Tensor& gy, const Tensor& x,
                              int kh, int kw, int stride, int pad, Tensor* gb);
Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor batchnorm_forward_train(const Tensor& x, const Tensor& gamma,
                               const Tensor& beta, float eps,
                               Tensor& save_mean, Tensor& save_invstd);
Tensor batchnorm_backward(const Tensor& gy, const Tensor& x,
                          const Tensor& gamma, const Tensor& save_mean,
                          const Tensor& save_invstd, Tensor* ggamma,
                          Tensor* gbeta);
Tensor leaky_relu_forward(const Tensor& x, float slope);
Tensor upsample2x_forward(const Tensor& x);
Tensor avgpool_forward(const Tensor& x, int factor);

}  // namespace advkd::kernels::ref
