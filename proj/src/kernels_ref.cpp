#include <cmath>

#include "advkd/error.hpp"
#include "advkd/kernels.hpp"

// Serial reference lane. Loops are written as plainly as possible; the
// per-element accumulation order matches the OpenMP lane so the two can be
// compared bit-for-bit.

namespace advkd::kernels::ref {

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                      int stride, int pad) {
    const int N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Cout = w.dim(0), Kh = w.dim(2), Kw = w.dim(3);
    const int Oh = (H + 2 * pad - Kh) / stride + 1;
    const int Ow = (W + 2 * pad - Kw) / stride + 1;
    Tensor y({N, Cout, Oh, Ow});
    for (int n = 0; n < N; ++n)
        for (int oc = 0; oc < Cout; ++oc)
            for (int oh = 0; oh < Oh; ++oh)
                for (int ow = 0; ow < Ow; ++ow) {
                    float acc = b.defined() ? b[oc] : 0.0f;
                    for (int ic = 0; ic < Cin; ++ic)
                        for (int kh = 0; kh < Kh; ++kh) {
                            const int ih = oh * stride - pad + kh;
                            if (ih < 0 || ih >= H) continue;
                            for (int kw = 0; kw < Kw; ++kw) {
                                const int iw = ow * stride - pad + kw;
                                if (iw < 0 || iw >= W) continue;
                                acc += w.at(oc, ic, kh, kw) * x.at(n, ic, ih, iw);
                            }
                        }
                    y.at(n, oc, oh, ow) = acc;
                }
    return y;
}

Tensor conv2d_backward_input(const Tensor& gy, const Tensor& w,
                             int stride, int pad, int in_h, int in_w) {
    const int N = gy.dim(0), Cout = gy.dim(1), Oh = gy.dim(2), Ow = gy.dim(3);
    const int Cin = w.dim(1), Kh = w.dim(2), Kw = w.dim(3);
    Tensor gx({N, Cin, in_h, in_w});
    for (int n = 0; n < N; ++n)
        for (int ic = 0; ic < Cin; ++ic)
            for (int ih = 0; ih < in_h; ++ih)
                for (int iw = 0; iw < in_w; ++iw) {
                    float acc = 0.0f;
                    for (int oc = 0; oc < Cout; ++oc)
                        for (int kh = 0; kh < Kh; ++kh) {
                            const int ihp = ih + pad - kh;
                            if (ihp < 0 || ihp % stride != 0) continue;
                            const int oh = ihp / stride;
                            if (oh >= Oh) continue;
                            for (int kw = 0; kw < Kw; ++kw) {
                                const int iwp = iw + pad - kw;
                                if (iwp < 0 || iwp % stride != 0) continue;
                                const int ow = iwp / stride;
                                if (ow >= Ow) continue;
                                acc += w.at(oc, ic, kh, kw) * gy.at(n, oc, oh, ow);
                            }
                        }
                    gx.at(n, ic, ih, iw) = acc;
                }
    return gx;
}

Tensor conv2d_backward_weight(const Tensor& gy, const Tensor& x,
                              int kh_size, int kw_size, int stride, int pad,
                              Tensor* gb) {
    const int N = gy.dim(0), Cout = gy.dim(1), Oh = gy.dim(2), Ow = gy.dim(3);
    const int Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor gw({Cout, Cin, kh_size, kw_size});
    for (int oc = 0; oc < Cout; ++oc)
        for (int ic = 0; ic < Cin; ++ic)
            for (int kh = 0; kh < kh_size; ++kh)
                for (int kw = 0; kw < kw_size; ++kw) {
                    double acc = 0.0;
                    for (int n = 0; n < N; ++n)
                        for (int oh = 0; oh < Oh; ++oh) {
                            const int ih = oh * stride - pad + kh;
                            if (ih < 0 || ih >= H) continue;
                            for (int ow = 0; ow < Ow; ++ow) {
                                const int iw = ow * stride - pad + kw;
                                if (iw < 0 || iw >= W) continue;
                                acc += (double)gy.at(n, oc, oh, ow) * (double)x.at(n, ic, ih, iw);
                            }
                        }
                    gw.at(oc, ic, kh, kw) = (float)acc;
                }
    if (gb) {
        if (!gb->defined()) *gb = Tensor({Cout});
        for (int oc = 0; oc < Cout; ++oc) {
            double acc = 0.0;
            for (int n = 0; n < N; ++n)
                for (int oh = 0; oh < Oh; ++oh)
                    for (int ow = 0; ow < Ow; ++ow) acc += gy.at(n, oc, oh, ow);
            (*gb)[oc] += (float)acc;
        }
    }
    return gw;
}

Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    const int N = x.dim(0), Din = x.dim(1), Dout = w.dim(0);
    Tensor y({N, Dout});
    for (int n = 0; n < N; ++n)
        for (int o = 0; o < Dout; ++o) {
            double acc = b.defined() ? (double)b[o] : 0.0;
            for (int i = 0; i < Din; ++i)
                acc += (double)x.at(n, i) * (double)w.at(o, i);
            y.at(n, o) = (float)acc;
        }
    return y;
}

Tensor batchnorm_forward_train(const Tensor& x, const Tensor& gamma,
                               const Tensor& beta, float eps,
                               Tensor& save_mean, Tensor& save_invstd) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const size_t plane = (size_t)H * W;
    const double count = (double)N * plane;
    if (!save_mean.defined()) save_mean = Tensor({C});
    if (!save_invstd.defined()) save_invstd = Tensor({C});
    for (int c = 0; c < C; ++c) {
        double s = 0.0, s2 = 0.0;
        for (int n = 0; n < N; ++n) {
            const float* p = x.data() + ((size_t)n * C + c) * plane;
            for (size_t i = 0; i < plane; ++i) {
                s += p[i];
                s2 += (double)p[i] * (double)p[i];
            }
        }
        const double mean = s / count;
        const double var = s2 / count - mean * mean;
        save_mean[c] = (float)mean;
        save_invstd[c] = (float)(1.0 / std::sqrt(std::max(var, 0.0) + (double)eps));
    }
    Tensor y(x.shape());
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const float m = save_mean[c], is = save_invstd[c];
            const float g = gamma[c], bt = beta[c];
            const float* p = x.data() + ((size_t)n * C + c) * plane;
            float* q = y.data() + ((size_t)n * C + c) * plane;
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
    Tensor s1t({C}), s2t({C});
    for (int c = 0; c < C; ++c) {
        const float m = save_mean[c], is = save_invstd[c];
        double s1 = 0.0, s2 = 0.0;
        for (int n = 0; n < N; ++n) {
            const float* gp = gy.data() + ((size_t)n * C + c) * plane;
            const float* xp = x.data() + ((size_t)n * C + c) * plane;
            for (size_t i = 0; i < plane; ++i) {
                s1 += gp[i];
                s2 += (double)gp[i] * (double)((xp[i] - m) * is);
            }
        }
        s1t[c] = (float)s1;
        s2t[c] = (float)s2;
    }
    if (ggamma) {
        if (!ggamma->defined()) *ggamma = Tensor({C});
        for (int c = 0; c < C; ++c) (*ggamma)[c] += s2t[c];
    }
    if (gbeta) {
        if (!gbeta->defined()) *gbeta = Tensor({C});
        for (int c = 0; c < C; ++c) (*gbeta)[c] += s1t[c];
    }
    Tensor gx(x.shape());
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const float m = save_mean[c], is = save_invstd[c], g = gamma[c];
            const float k = g * is;
            const float mean_gy = (float)(s1t[c] / count);
            const float mean_gy_xhat = (float)(s2t[c] / count);
            const float* gp = gy.data() + ((size_t)n * C + c) * plane;
            const float* xp = x.data() + ((size_t)n * C + c) * plane;
            float* qp = gx.data() + ((size_t)n * C + c) * plane;
            for (size_t i = 0; i < plane; ++i) {
                const float xhat = (xp[i] - m) * is;
                qp[i] = k * (gp[i] - mean_gy - xhat * mean_gy_xhat);
            }
        }
    return gx;
}

Tensor leaky_relu_forward(const Tensor& x, float slope) {
    Tensor y(x.shape());
    for (size_t i = 0; i < x.numel(); ++i)
        y[i] = x[i] > 0.0f ? x[i] : slope * x[i];
    return y;
}

Tensor upsample2x_forward(const Tensor& x) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor y({N, C, 2 * H, 2 * W});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int h = 0; h < 2 * H; ++h)
                for (int w = 0; w < 2 * W; ++w)
                    y.at(n, c, h, w) = x.at(n, c, h / 2, w / 2);
    return y;
}

Tensor avgpool_forward(const Tensor& x, int factor) {
    if (factor == 1) return x;
    const bool batched = x.rank() == 4;
    const int N = batched ? x.dim(0) : 1;
    const int C = batched ? x.dim(1) : x.dim(0);
    const int H = batched ? x.dim(2) : x.dim(1);
    const int W = batched ? x.dim(3) : x.dim(2);
    const int Oh = H / factor, Ow = W / factor;
    Tensor y = batched ? Tensor({N, C, Oh, Ow}) : Tensor({C, Oh, Ow});
    const double inv = 1.0 / ((double)factor * factor);
    for (int p = 0; p < N * C; ++p) {
        const float* in = x.data() + (size_t)p * H * W;
        float* out = y.data() + (size_t)p * Oh * Ow;
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

}  // namespace advkd::kernels::ref
