#include "advkd/nn.hpp"

#include <cmath>

#include "advkd/error.hpp"

namespace advkd::nn {

using namespace advkd::kernels;

Conv2d::Conv2d(std::string name, int in_c_, int out_c_, int ksize_, int stride_,
               int pad_, bool with_bias_)
    : in_c(in_c_), out_c(out_c_), ksize(ksize_), stride(stride_), pad(pad_),
      with_bias(with_bias_) {
    weight.name = name + ".weight";
    weight.value = Tensor({out_c, in_c, ksize, ksize});
    if (with_bias) {
        bias.name = name + ".bias";
        bias.value = Tensor({out_c});
    }
}

void Conv2d::init_he(Rng& rng) {
    const float fan_in = (float)(in_c * ksize * ksize);
    const float stddev = std::sqrt(2.0f / fan_in);
    init_normal(rng, stddev);
}

void Conv2d::init_normal(Rng& rng, float stddev) {
    float* p = weight.value.data();
    for (size_t i = 0; i < weight.value.numel(); ++i) p[i] = stddev * rng.normal();
    if (with_bias) bias.value.zero();
}

void Conv2d::init_zero() {
    weight.value.zero();
    if (with_bias) bias.value.zero();
}

Tensor Conv2d::forward(const Tensor& x, bool cache) {
    if (cache) cached_x_ = x;
    return conv2d_forward(x, weight.value, with_bias ? bias.value : Tensor(), stride, pad);
}

Tensor Conv2d::backward(const Tensor& gy) {
    if (!cached_x_.defined()) throw ConfigError(weight.name + ": backward without cached forward");
    weight.ensure_grad();
    Tensor gw = conv2d_backward_weight(gy, cached_x_, ksize, ksize, stride, pad,
                                       with_bias ? &bias.ensure_grad() : nullptr);
    add_inplace(weight.grad, gw);
    return conv2d_backward_input(gy, weight.value, stride, pad, cached_x_.dim(2),
                                 cached_x_.dim(3));
}

Tensor Conv2d::apply_nobias(const Tensor& x) const {
    return conv2d_forward(x, weight.value, Tensor(), stride, pad);
}

Tensor Conv2d::backward_input_only(const Tensor& gy, int in_h, int in_w) const {
    return conv2d_backward_input(gy, weight.value, stride, pad, in_h, in_w);
}

void Conv2d::accumulate_weight_grad(const Tensor& x, const Tensor& gy) {
    weight.ensure_grad();
    Tensor gw = conv2d_backward_weight(gy, x, ksize, ksize, stride, pad, nullptr);
    add_inplace(weight.grad, gw);
}

void Conv2d::visit_params(const ParamFn& fn) {
    fn(weight);
    if (with_bias) fn(bias);
}

void Conv2d::visit_state(const std::string& prefix, const StateFn& fn) {
    fn(prefix + ".weight", weight.value);
    if (with_bias) fn(prefix + ".bias", bias.value);
}

Linear::Linear(std::string name, int in_dim_, int out_dim_)
    : in_dim(in_dim_), out_dim(out_dim_) {
    weight.name = name + ".weight";
    weight.value = Tensor({out_dim, in_dim});
    bias.name = name + ".bias";
    bias.value = Tensor({out_dim});
}

void Linear::init_he(Rng& rng) {
    const float stddev = std::sqrt(2.0f / (float)in_dim);
    init_normal(rng, stddev);
}

void Linear::init_normal(Rng& rng, float stddev) {
    float* p = weight.value.data();
    for (size_t i = 0; i < weight.value.numel(); ++i) p[i] = stddev * rng.normal();
    bias.value.zero();
}

void Linear::init_zero() {
    weight.value.zero();
    bias.value.zero();
}

Tensor Linear::forward(const Tensor& x, bool cache) {
    if (cache) cached_x_ = x;
    return linear_forward(x, weight.value, bias.value);
}

Tensor Linear::backward(const Tensor& gy) {
    if (!cached_x_.defined()) throw ConfigError(weight.name + ": backward without cached forward");
    return linear_backward(gy, cached_x_, weight.value, &weight.ensure_grad(),
                           &bias.ensure_grad());
}

void Linear::visit_params(const ParamFn& fn) {
    fn(weight);
    fn(bias);
}

void Linear::visit_state(const std::string& prefix, const StateFn& fn) {
    fn(prefix + ".weight", weight.value);
    fn(prefix + ".bias", bias.value);
}

BatchNorm2d::BatchNorm2d(std::string name, int channels_, float momentum_, float eps_)
    : channels(channels_), momentum(momentum_), eps(eps_) {
    gamma.name = name + ".gamma";
    gamma.value = Tensor::full({channels}, 1.0f);
    beta.name = name + ".beta";
    beta.value = Tensor({channels});
    running_mean = Tensor({channels});
    running_var = Tensor::full({channels}, 1.0f);
}

Tensor BatchNorm2d::forward(const Tensor& x, Mode mode, bool cache) {
    if (mode == Mode::eval)
        return batchnorm_forward_eval(x, gamma.value, beta.value, running_mean,
                                      running_var, eps);
    Tensor mean, invstd;
    Tensor y = batchnorm_forward_train(x, gamma.value, beta.value, eps, mean, invstd);
    for (int c = 0; c < channels; ++c) {
        const float m = mean[c];
        const float is = invstd[c];
        const float var = 1.0f / (is * is) - eps;
        running_mean[c] = (1.0f - momentum) * running_mean[c] + momentum * m;
        running_var[c] = (1.0f - momentum) * running_var[c] + momentum * var;
    }
    if (cache) {
        cached_x_ = x;
        save_mean_ = mean;
        save_invstd_ = invstd;
    }
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& gy) {
    if (!cached_x_.defined()) throw ConfigError(gamma.name + ": backward without cached forward");
    return batchnorm_backward(gy, cached_x_, gamma.value, save_mean_, save_invstd_,
                              &gamma.ensure_grad(), &beta.ensure_grad());
}

void BatchNorm2d::visit_params(const ParamFn& fn) {
    fn(gamma);
    fn(beta);
}

void BatchNorm2d::visit_state(const std::string& prefix, const StateFn& fn) {
    fn(prefix + ".gamma", gamma.value);
    fn(prefix + ".beta", beta.value);
    fn(prefix + ".running_mean", running_mean);
    fn(prefix + ".running_var", running_var);
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const int N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), H = a.dim(2), W = a.dim(3);
    if (b.dim(0) != N || b.dim(2) != H || b.dim(3) != W)
        throw ConfigError("concat_channels: incompatible shapes");
    Tensor y({N, Ca + Cb, H, W});
    const size_t plane = (size_t)H * W;
    for (int n = 0; n < N; ++n) {
        std::copy_n(a.data() + (size_t)n * Ca * plane, Ca * plane,
                    y.data() + (size_t)n * (Ca + Cb) * plane);
        std::copy_n(b.data() + (size_t)n * Cb * plane, Cb * plane,
                    y.data() + ((size_t)n * (Ca + Cb) + Ca) * plane);
    }
    return y;
}

void split_channels(const Tensor& g, int c_first, Tensor& ga, Tensor& gb) {
    const int N = g.dim(0), C = g.dim(1), H = g.dim(2), W = g.dim(3);
    const int Cb = C - c_first;
    ga = Tensor({N, c_first, H, W});
    gb = Tensor({N, Cb, H, W});
    const size_t plane = (size_t)H * W;
    for (int n = 0; n < N; ++n) {
        std::copy_n(g.data() + (size_t)n * C * plane, c_first * plane,
                    ga.data() + (size_t)n * c_first * plane);
        std::copy_n(g.data() + ((size_t)n * C + c_first) * plane, Cb * plane,
                    gb.data() + (size_t)n * Cb * plane);
    }
}

Tensor sinusoidal_embedding(const std::vector<int>& t, int dim) {
    if (dim < 2 || dim % 2 != 0)
        throw ConfigError("sinusoidal_embedding: dim must be even and >= 2");
    const int half = dim / 2;
    const int N = (int)t.size();
    Tensor e({N, dim});
    const double log_base = std::log(10000.0);
    for (int n = 0; n < N; ++n)
        for (int i = 0; i < half; ++i) {
            const double freq =
                std::exp(-log_base * (double)i / (double)std::max(half - 1, 1));
            const double ang = (double)t[(size_t)n] * freq;
            e.at(n, i) = (float)std::sin(ang);
            e.at(n, half + i) = (float)std::cos(ang);
        }
    return e;
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias_nc) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (bias_nc.dim(0) != N || bias_nc.dim(1) != C)
        throw ConfigError("add_channel_bias: shape mismatch");
    Tensor y = x;
    const size_t plane = (size_t)H * W;
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const float b = bias_nc.at(n, c);
            float* p = y.data() + ((size_t)n * C + c) * plane;
            for (size_t i = 0; i < plane; ++i) p[i] += b;
        }
    return y;
}

Tensor sum_spatial(const Tensor& g) {
    const int N = g.dim(0), C = g.dim(1), H = g.dim(2), W = g.dim(3);
    Tensor out({N, C});
    const size_t plane = (size_t)H * W;
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            double acc = 0.0;
            const float* p = g.data() + ((size_t)n * C + c) * plane;
            for (size_t i = 0; i < plane; ++i) acc += p[i];
            out.at(n, c) = (float)acc;
        }
    return out;
}

}  // namespace advkd::nn
