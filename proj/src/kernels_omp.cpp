#include "advkd/kernels.hpp"

#include <cmath>

#include "advkd/error.hpp"

namespace advkd::kernels {

namespace {

// First i >= 0 with i*stride + base >= 0.
inline int lo_index(int base, int stride) {
    if (base >= 0) return 0;
    return (-base + stride - 1) / stride;
}

// First i with i*stride + base >= limit (exclusive upper bound).
inline int hi_index(int base, int stride, int limit) {
    if (limit - base <= 0) return 0;
    return (limit - base + stride - 1) / stride;
}

inline void check_conv_args(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.rank() != 4 || w.rank() != 4)
        throw ConfigError("conv2d: expected rank-4 input and weight");
    if (x.dim(1) != w.dim(1))
        throw ConfigError("conv2d: input channels " + std::to_string(x.dim(1)) +
                          " do not match weight " + std::to_string(w.dim(1)));
    if (b.defined() && (b.rank() != 1 || b.dim(0) != w.dim(0)))
        throw ConfigError("conv2d: bad bias shape");
}

}  // namespace

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                      int stride, int pad) {
    check_conv_args(x, w, b);
    const int N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Cout = w.dim(0), Kh = w.dim(2), Kw = w.dim(3);
    const int Oh = (H + 2 * pad - Kh) / stride + 1;
    const int Ow = (W + 2 * pad - Kw) / stride + 1;
    if (Oh <= 0 || Ow <= 0) throw ConfigError("conv2d: empty output");

    Tensor y({N, Cout, Oh, Ow});
    const float* px = x.data();
    const float* pw = w.data();
    const float* pb = b.defined() ? b.data() : nullptr;
    float* py = y.data();

#pragma omp parallel for collapse(3) schedule(static)
    for (int n = 0; n < N; ++n)
        for (int oc = 0; oc < Cout; ++oc)
            for (int oh = 0; oh < Oh; ++oh) {
                float* out_row = py + (((size_t)n * Cout + oc) * Oh + oh) * Ow;
                const float init = pb ? pb[oc] : 0.0f;
                for (int ow = 0; ow < Ow; ++ow) out_row[ow] = init;
                for (int ic = 0; ic < Cin; ++ic)
                    for (int kh = 0; kh < Kh; ++kh) {
                        const int ih = oh * stride - pad + kh;
                        if (ih < 0 || ih >= H) continue;
                        const float* x_row = px + (((size_t)n * Cin + ic) * H + ih) * W;
                        const float* w_row = pw + (((size_t)oc * Cin + ic) * Kh + kh) * Kw;
                        for (int kw = 0; kw < Kw; ++kw) {
                            const float wv = w_row[kw];
                            const int base = kw - pad;
                            const int lo = lo_index(base, stride);
                            const int hi = std::min(Ow, hi_index(base, stride, W));
                            for (int ow = lo; ow < hi; ++ow)
                                out_row[ow] += wv * x_row[ow * stride + base];
                        }
                    }
            }
    return y;
}

Tensor conv2d_backward_input(const Tensor& gy, const Tensor& w,
                             int stride, int pad, int in_h, int in_w) {
    const int N = gy.dim(0), Cout = gy.dim(1), Oh = gy.dim(2), Ow = gy.dim(3);
    const int Cin = w.dim(1), Kh = w.dim(2), Kw = w.dim(3);
    if (w.dim(0) != Cout) throw ConfigError("conv2d backward: channel mismatch");

    Tensor gx({N, Cin, in_h, in_w});
    const float* pg = gy.data();
    const float* pw = w.data();
    float* px = gx.data();

#pragma omp parallel for collapse(3) schedule(static)
    for (int n = 0; n < N; ++n)
        for (int ic = 0; ic < Cin; ++ic)
            for (int ih = 0; ih < in_h; ++ih) {
                float* grow = px + (((size_t)n * Cin + ic) * in_h + ih) * in_w;
                for (int iw = 0; iw < in_w; ++iw) grow[iw] = 0.0f;
                for (int oc = 0; oc < Cout; ++oc)
                    for (int kh = 0; kh < Kh; ++kh) {
                        const int ihp = ih + pad - kh;
                        if (ihp < 0 || ihp % stride != 0) continue;
                        const int oh = ihp / stride;
                        if (oh >= Oh) continue;
                        const float* gy_row = pg + (((size_t)n * Cout + oc) * Oh + oh) * Ow;
                        const float* w_row = pw + (((size_t)oc * Cin + ic) * Kh + kh) * Kw;
                        for (int kw = 0; kw < Kw; ++kw) {
                            const float wv = w_row[kw];
                            const int base = kw - pad;
                            const int lo = lo_index(base, stride);
                            const int hi = std::min(Ow, hi_index(base, stride, in_w));
                            for (int ow = lo; ow < hi; ++ow)
                                grow[ow * stride + base] += wv * gy_row[ow];
                        }
                    }
            }
    return gx;
}

Tensor conv2d_backward_weight(const Tensor& gy, const Tensor& x,
                              int kh_size, int kw_size, int stride, int pad,
                              Tensor* gb) {
    const int N = gy.dim(0), Cout = gy.dim(1), Oh = gy.dim(2), Ow = gy.dim(3);
    const int Cin = x.dim(1), H = x.dim(2), W = x.dim(3);

    Tensor gw({Cout, Cin, kh_size, kw_size});
    const float* pg = gy.data();
    const float* px = x.data();
    float* pgw = gw.data();

#pragma omp parallel for collapse(2) schedule(static)
    for (int oc = 0; oc < Cout; ++oc)
        for (int ic = 0; ic < Cin; ++ic)
            for (int kh = 0; kh < kh_size; ++kh)
                for (int kw = 0; kw < kw_size; ++kw) {
                    double acc = 0.0;
                    for (int n = 0; n < N; ++n) {
                        const float* gy_base = pg + ((size_t)n * Cout + oc) * Oh * Ow;
                        const float* x_base = px + ((size_t)n * Cin + ic) * H * W;
                        for (int oh = 0; oh < Oh; ++oh) {
                            const int ih = oh * stride - pad + kh;
                            if (ih < 0 || ih >= H) continue;
                            const float* gy_row = gy_base + (size_t)oh * Ow;
                            const float* x_row = x_base + (size_t)ih * W;
                            const int base = kw - pad;
                            const int lo = lo_index(base, stride);
                            const int hi = std::min(Ow, hi_index(base, stride, W));
                            for (int ow = lo; ow < hi; ++ow)
                                acc += (double)gy_row[ow] * (double)x_row[ow * stride + base];
                        }
                    }
                    pgw[(((size_t)oc * Cin + ic) * kh_size + kh) * kw_size + kw] =
                        (float)acc;
                }

    if (gb) {
        if (!gb->defined()) *gb = Tensor({Cout});
        float* pgb = gb->data();
#pragma omp parallel for schedule(static)
        for (int oc = 0; oc < Cout; ++oc) {
            double acc = 0.0;
            for (int n = 0; n < N; ++n) {
                const float* gy_base = pg + ((size_t)n * Cout + oc) * Oh * Ow;
                for (int i = 0; i < Oh * Ow; ++i) acc += gy_base[i];
            }
            pgb[oc] += (float)acc;
        }
    }
    return gw;
}

Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    const int N = x.dim(0), Din = x.dim(1);
    const int Dout = w.dim(0);
    if (w.dim(1) != Din) throw ConfigError("linear: dimension mismatch");
    Tensor y({N, Dout});
    const float* px = x.data();
    const float* pw = w.data();
    const float* pb = b.defined() ? b.data() : nullptr;
    float* py = y.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n)
        for (int o = 0; o < Dout; ++o) {
            double acc = pb ? (double)pb[o] : 0.0;
            const float* x_row = px + (size_t)n * Din;
            const float* w_row = pw + (size_t)o * Din;
            for (int i = 0; i < Din; ++i) acc += (double)x_row[i] * (double)w_row[i];
            py[(size_t)n * Dout + o] = (float)acc;
        }
    return y;
}

Tensor linear_backward(const Tensor& gy, const Tensor& x, const Tensor& w,
                       Tensor* gw, Tensor* gb) {
    const int N = x.dim(0), Din = x.dim(1), Dout = w.dim(0);
    Tensor gx({N, Din});
    const float* pg = gy.data();
    const float* px = x.data();
    const float* pw = w.data();
    float* pgx = gx.data();
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n)
        for (int i = 0; i < Din; ++i) {
            double acc = 0.0;
            for (int o = 0; o < Dout; ++o)
                acc += (double)pg[(size_t)n * Dout + o] * (double)pw[(size_t)o * Din + i];
            pgx[(size_t)n * Din + i] = (float)acc;
        }
    if (gw) {
        if (!gw->defined()) *gw = Tensor({Dout, Din});
        float* pgw = gw->data();
#pragma omp parallel for collapse(2) schedule(static)
        for (int o = 0; o < Dout; ++o)
            for (int i = 0; i < Din; ++i) {
                double acc = 0.0;
                for (int n = 0; n < N; ++n)
                    acc += (double)pg[(size_t)n * Dout + o] * (double)px[(size_t)n * Din + i];
                pgw[(size_t)o * Din + i] += (float)acc;
            }
    }
    if (gb) {
        if (!gb->defined()) *gb = Tensor({Dout});
        float* pgb = gb->data();
#pragma omp parallel for schedule(static)
        for (int o = 0; o < Dout; ++o) {
            double acc = 0.0;
            for (int n = 0; n < N; ++n) acc += (double)pg[(size_t)n * Dout + o];
            pgb[o] += (float)acc;
        }
    }
    return gx;
}

Tensor batchnorm_forward_train(const Tensor& x, const Tensor& gamma,
                               const Tensor& beta, float eps,
                               Tensor& save_mean, Tensor& save_invstd) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const size_t plane = (size_t)H * W;
    const double count = (double)N * plane;
    if (!save_mean.defined()) save_mean = Tensor({C});
    if (!save_invstd.defined()) save_invstd = Tensor({C});
    const float* px = x.data();
    float* pmean = save_mean.data();
    float* pinv = save_invstd.data();

#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
        double s = 0.0, s2 = 0.0;
        for (int n = 0; n < N; ++n) {
            const float* p = px + ((size_t)n * C + c) * plane;
            for (size_t i = 0; i < plane; ++i) {
                s += p[i];
                s2 += (double)p[i] * (double)p[i];
            }
        }
        const double mean = s / count;
        const double var = s2 / count - mean * mean;
        pmean[c] = (float)mean;
        pinv[c] = (float)(1.0 / std::sqrt(std::max(var, 0.0) + (double)eps));
    }

    Tensor y(x.shape());
    const float* pgm = gamma.data();
    const float* pbt = beta.data();
    float* py = y.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const float m = pmean[c], is = pinv[c], g = pgm[c], bt = pbt[c];
            const float* p = px + ((size_t)n * C + c) * plane;
            float* q = py + ((size_t)n * C + c) * plane;
            for (size_t i = 0; i < plane; ++i) q[i] = g * (p[i] - m) * is + bt;
        }
    return y;
}

Tensor batchnorm_forward_eval(const Tensor& x, const Tensor& gamma,
                              const Tensor& beta, const Tensor& rmean,
                              const Tensor& rvar, float eps) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const size_t plane = (size_t)H * W;
    Tensor y(x.shape());
    const float* px = x.data();
    float* py = y.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const float m = rmean[c];
            const float is = 1.0f / std::sqrt(rvar[c] + eps);
            const float g = gamma[c], bt = beta[c];
            const float* p = px + ((size_t)n * C + c) * plane;
            float* q = py + ((size_t)n * C + c) * plane;
            for (size_t i = 0; i < plane; ++i) q[i] = g * (p[i] - m) * is + bt;
        }
    return y;
}

Tensor batchnorm_backward(const Tensor& gy, const Tensor& x,
                          const Tensor& gamma, const Tensor& save_mean,
                          const Tensor& save_invstd, Tensor* ggamma,
                          Tensor* gbeta) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const size_t plane = (size_t)H * W;
    const double count = (double)N * plane;

    Tensor sum_gy({C}), sum_gy_xhat({C});
    const float* pg = gy.data();
    const float* px = x.data();
    float* ps1 = sum_gy.data();
    float* ps2 = sum_gy_xhat.data();

#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
        const float m = save_mean[c], is = save_invstd[c];
        double s1 = 0.0, s2 = 0.0;
        for (int n = 0; n < N; ++n) {
            const float* gp = pg + ((size_t)n * C + c) * plane;
            const float* xp = px + ((size_t)n * C + c) * plane;
            for (size_t i = 0; i < plane; ++i) {
                s1 += gp[i];
                s2 += (double)gp[i] * (double)((xp[i] - m) * is);
            }
        }
        ps1[c] = (float)s1;
        ps2[c] = (float)s2;
    }

    if (ggamma) {
        if (!ggamma->defined()) *ggamma = Tensor({C});
        for (int c = 0; c < C; ++c) (*ggamma)[c] += ps2[c];
    }
    if (gbeta) {
        if (!gbeta->defined()) *gbeta = Tensor({C});
        for (int c = 0; c < C; ++c) (*gbeta)[c] += ps1[c];
    }

    Tensor gx(x.shape());
    float* pgx = gx.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const float m = save_mean[c], is = save_invstd[c], g = gamma[c];
            const float k = g * is;
            const float mean_gy = (float)(ps1[c] / count);
            const float mean_gy_xhat = (float)(ps2[c] / count);
            const float* gp = pg + ((size_t)n * C + c) * plane;
            const float* xp = px + ((size_t)n * C + c) * plane;
            float* qp = pgx + ((size_t)n * C + c) * plane;
            for (size_t i = 0; i < plane; ++i) {
                const float xhat = (xp[i] - m) * is;
                qp[i] = k * (gp[i] - mean_gy - xhat * mean_gy_xhat);
            }
        }
    return gx;
}

Tensor leaky_relu_forward(const Tensor& x, float slope) {
    Tensor y(x.shape());
    const float* px = x.data();
    float* py = y.data();
    const ptrdiff_t n = (ptrdiff_t)x.numel();
#pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < n; ++i) py[i] = px[i] > 0.0f ? px[i] : slope * px[i];
    return y;
}

Tensor leaky_relu_backward(const Tensor& gy, const Tensor& x, float slope) {
    Tensor gx(x.shape());
    const float* pg = gy.data();
    const float* px = x.data();
    float* pq = gx.data();
    const ptrdiff_t n = (ptrdiff_t)x.numel();
#pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < n; ++i) pq[i] = px[i] > 0.0f ? pg[i] : slope * pg[i];
    return gx;
}

Tensor tanh_forward(const Tensor& x) {
    Tensor y(x.shape());
    const float* px = x.data();
    float* py = y.data();
    const ptrdiff_t n = (ptrdiff_t)x.numel();
#pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < n; ++i) py[i] = std::tanh(px[i]);
    return y;
}

Tensor tanh_backward(const Tensor& gy, const Tensor& y) {
    Tensor gx(y.shape());
    const float* pg = gy.data();
    const float* py = y.data();
    float* pq = gx.data();
    const ptrdiff_t n = (ptrdiff_t)y.numel();
#pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < n; ++i) pq[i] = pg[i] * (1.0f - py[i] * py[i]);
    return gx;
}

Tensor silu_forward(const Tensor& x) {
    Tensor y(x.shape());
    const float* px = x.data();
    float* py = y.data();
    const ptrdiff_t n = (ptrdiff_t)x.numel();
#pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < n; ++i) {
        const float s = 1.0f / (1.0f + std::exp(-px[i]));
        py[i] = px[i] * s;
    }
    return y;
}

Tensor silu_backward(const Tensor& gy, const Tensor& x) {
    Tensor gx(x.shape());
    const float* pg = gy.data();
    const float* px = x.data();
    float* pq = gx.data();
    const ptrdiff_t n = (ptrdiff_t)x.numel();
#pragma omp parallel for schedule(static)
    for (ptrdiff_t i = 0; i < n; ++i) {
        const float s = 1.0f / (1.0f + std::exp(-px[i]));
        pq[i] = pg[i] * s * (1.0f + px[i] * (1.0f - s));
    }
    return gx;
}

Tensor upsample2x_forward(const Tensor& x) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor y({N, C, 2 * H, 2 * W});
    const float* px = x.data();
    float* py = y.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const float* p = px + ((size_t)n * C + c) * H * W;
            float* q = py + ((size_t)n * C + c) * 4 * H * W;
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    const float v = p[(size_t)h * W + w];
                    float* q0 = q + (size_t)(2 * h) * 2 * W + 2 * w;
                    q0[0] = v;
                    q0[1] = v;
                    q0[2 * W] = v;
                    q0[2 * W + 1] = v;
                }
        }
    return y;
}

Tensor upsample2x_backward(const Tensor& gy) {
    const int N = gy.dim(0), C = gy.dim(1), H2 = gy.dim(2), W2 = gy.dim(3);
    const int H = H2 / 2, W = W2 / 2;
    Tensor gx({N, C, H, W});
    const float* pg = gy.data();
    float* pq = gx.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const float* g = pg + ((size_t)n * C + c) * H2 * W2;
            float* q = pq + ((size_t)n * C + c) * H * W;
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    const float* g0 = g + (size_t)(2 * h) * W2 + 2 * w;
                    q[(size_t)h * W + w] = g0[0] + g0[1] + g0[W2] + g0[W2 + 1];
                }
        }
    return gx;
}

Tensor avgpool_forward(const Tensor& x, int factor) {
    if (factor < 1) throw ConfigError("avgpool: factor must be >= 1");
    if (factor == 1) return x;
    const bool batched = x.rank() == 4;
    const int N = batched ? x.dim(0) : 1;
    const int C = batched ? x.dim(1) : x.dim(0);
    const int H = batched ? x.dim(2) : x.dim(1);
    const int W = batched ? x.dim(3) : x.dim(2);
    if (H % factor != 0 || W % factor != 0)
        throw ConfigError("avgpool: resolution not divisible by factor");
    const int Oh = H / factor, Ow = W / factor;
    Tensor y = batched ? Tensor({N, C, Oh, Ow}) : Tensor({C, Oh, Ow});
    const float* px = x.data();
    float* py = y.data();
    const double inv = 1.0 / ((double)factor * factor);
    const ptrdiff_t planes = (ptrdiff_t)N * C;
#pragma omp parallel for schedule(static)
    for (ptrdiff_t p = 0; p < planes; ++p) {
        const float* in = px + (size_t)p * H * W;
        float* out = py + (size_t)p * Oh * Ow;
        for (int oh = 0; oh < Oh; ++oh)
            for (int ow = 0; ow < Ow; ++ow) {
                double acc = 0.0;
                for (int dh = 0; dh < factor; ++dh)
                    for (int dw = 0; dw < factor; ++dw)
                        acc += in[(size_t)(oh * factor + dh) * W + ow * factor + dw];
                out[(size_t)oh * Ow + ow] = (float)(acc * inv);
            }
    }
    return y;
}

}  // namespace advkd::kernels
