#pragma once

#include <functional>
#include <string>
#include <vector>

#include "advkd/kernels.hpp"
#include "advkd/rng.hpp"
#include "advkd/tensor.hpp"

namespace advkd::nn {

enum class Mode { train, eval };

/// Named trainable tensor. Gradient storage is allocated on first use so
/// inference-only models stay at parameter-array size.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Tensor& ensure_grad() {
        if (!grad.defined()) grad = Tensor(value.shape());
        return grad;
    }
    void zero_grad() {
        if (grad.defined()) grad.zero();
    }
};

using ParamFn = std::function<void(Param&)>;
/// Visits persistent state: parameters plus non-trainable buffers.
using StateFn = std::function<void(const std::string&, Tensor&)>;

class Conv2d {
public:
    Conv2d() = default;
    Conv2d(std::string name, int in_c, int out_c, int ksize, int stride, int pad,
           bool with_bias = true);

    void init_he(Rng& rng);
    void init_normal(Rng& rng, float stddev);
    void init_zero();

    Tensor forward(const Tensor& x, bool cache);
    /// Accumulates weight/bias grads from the cached forward, returns grad_x.
    Tensor backward(const Tensor& gy);
    /// Linear map with the current weights, no bias, no caching. Used by the
    /// critic's gradient-penalty sweep.
    Tensor apply_nobias(const Tensor& x) const;
    Tensor backward_input_only(const Tensor& gy, int in_h, int in_w) const;
    /// Accumulates grad contributions for an externally supplied
    /// (input, grad_out) pair without touching the cache.
    void accumulate_weight_grad(const Tensor& x, const Tensor& gy);

    void visit_params(const ParamFn& fn);
    void visit_state(const std::string& prefix, const StateFn& fn);

    Param weight;  // (out_c, in_c, k, k)
    Param bias;    // (out_c) when enabled
    int in_c = 0, out_c = 0, ksize = 0, stride = 1, pad = 0;
    bool with_bias = true;

private:
    Tensor cached_x_;
};

class Linear {
public:
    Linear() = default;
    Linear(std::string name, int in_dim, int out_dim);

    void init_he(Rng& rng);
    void init_normal(Rng& rng, float stddev);
    void init_zero();

    Tensor forward(const Tensor& x, bool cache);
    Tensor backward(const Tensor& gy);

    void visit_params(const ParamFn& fn);
    void visit_state(const std::string& prefix, const StateFn& fn);

    Param weight;  // (out, in)
    Param bias;    // (out)
    int in_dim = 0, out_dim = 0;

private:
    Tensor cached_x_;
};

class BatchNorm2d {
public:
    BatchNorm2d() = default;
    BatchNorm2d(std::string name, int channels, float momentum = 0.1f,
                float eps = 1e-5f);

    Tensor forward(const Tensor& x, Mode mode, bool cache);
    Tensor backward(const Tensor& gy);

    void visit_params(const ParamFn& fn);
    void visit_state(const std::string& prefix, const StateFn& fn);

    Param gamma, beta;
    Tensor running_mean, running_var;
    int channels = 0;
    float momentum = 0.1f, eps = 1e-5f;

private:
    Tensor cached_x_, save_mean_, save_invstd_;
};

// Channel concatenation helpers for skip connections.
Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& g, int c_first, Tensor& ga, Tensor& gb);

/// Sinusoidal position embedding of integer timesteps, shape (N, dim).
Tensor sinusoidal_embedding(const std::vector<int>& t, int dim);

/// y[n,c,h,w] = x[n,c,h,w] + bias[n,c]
Tensor add_channel_bias(const Tensor& x, const Tensor& bias_nc);
/// Reduces a (N,C,H,W) gradient to the (N,C) bias gradient.
Tensor sum_spatial(const Tensor& g);

}  // namespace advkd::nn
