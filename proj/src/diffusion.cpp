#include "advkd/diffusion.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstring>

#include "advkd/error.hpp"
#include "advkd/rng.hpp"

namespace advkd::diffusion {

void NoiseSchedule::validate() const {
    if (T < 1 || (int)betas.size() != T || (int)alphas.size() != T ||
        (int)alpha_bars.size() != T)
        throw ConfigError("schedule: inconsistent array lengths");
    double prev_bar = 1.0;
    for (int t = 0; t < T; ++t) {
        if (!(betas[t] > 0.0f && betas[t] < 1.0f))
            throw ConfigError("schedule: beta out of (0,1) at t=" + std::to_string(t));
        if (!(alpha_bars[t] < prev_bar))
            throw ConfigError("schedule: alpha_bar not strictly decreasing at t=" +
                              std::to_string(t));
        prev_bar = alpha_bars[t];
    }
}

float NoiseSchedule::alpha_bar_at(int t) const {
    if (t == -1) return 1.0f;
    if (t < 0 || t >= T) throw ConfigError("schedule: step index out of range");
    return alpha_bars[(size_t)t];
}

NoiseSchedule make_linear_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw ConfigError("make_linear_schedule: T must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw ConfigError("make_linear_schedule: endpoints must satisfy 0 < start <= end < 1");
    NoiseSchedule s;
    s.T = T;
    s.beta_start = beta_start;
    s.beta_end = beta_end;
    s.betas.resize((size_t)T);
    s.alphas.resize((size_t)T);
    s.alpha_bars.resize((size_t)T);
    double bar = 1.0;
    for (int t = 0; t < T; ++t) {
        const double frac = T == 1 ? 0.0 : (double)t / (double)(T - 1);
        const double beta = beta_start + (beta_end - beta_start) * frac;
        s.betas[(size_t)t] = (float)beta;
        s.alphas[(size_t)t] = (float)(1.0 - beta);
        bar *= 1.0 - beta;
        s.alpha_bars[(size_t)t] = (float)bar;
    }
    s.validate();
    return s;
}

std::string schedule_hash(const NoiseSchedule& s) {
    static_assert(sizeof(float) == 4);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    EVP_DigestUpdate(ctx, s.betas.data(), s.betas.size() * sizeof(float));
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

namespace {
void check_step(int t, const NoiseSchedule& s) {
    if (t < 0 || t >= s.T)
        throw ConfigError("step index " + std::to_string(t) + " out of [0," +
                          std::to_string(s.T) + ")");
}
}  // namespace

Tensor q_sample(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& s) {
    require_same_shape(x0, eps, "q_sample");
    check_step(t, s);
    const float a = std::sqrt(s.alpha_bars[(size_t)t]);
    const float b = std::sqrt(1.0f - s.alpha_bars[(size_t)t]);
    Tensor out(x0.shape());
    const float* px = x0.data();
    const float* pe = eps.data();
    float* po = out.data();
    for (size_t i = 0; i < out.numel(); ++i) po[i] = a * px[i] + b * pe[i];
    return out;
}

Tensor forward_kernel_step(const Tensor& x_prev, int t, const Tensor& eps,
                           const NoiseSchedule& s) {
    require_same_shape(x_prev, eps, "forward_kernel_step");
    check_step(t, s);
    const float a = std::sqrt(1.0f - s.betas[(size_t)t]);
    const float b = std::sqrt(s.betas[(size_t)t]);
    Tensor out(x_prev.shape());
    const float* px = x_prev.data();
    const float* pe = eps.data();
    float* po = out.data();
    for (size_t i = 0; i < out.numel(); ++i) po[i] = a * px[i] + b * pe[i];
    return out;
}

float simple_loss(const Tensor& eps_true, const Tensor& eps_pred) {
    return mse(eps_true, eps_pred);
}

Tensor ddpm_reverse_step(const Tensor& x_t, int t, const Tensor& eps_hat,
                         const Tensor& noise, const NoiseSchedule& s) {
    require_same_shape(x_t, eps_hat, "ddpm_reverse_step");
    require_same_shape(x_t, noise, "ddpm_reverse_step(noise)");
    check_step(t, s);
    const float beta = s.betas[(size_t)t];
    const float inv_sqrt_alpha = 1.0f / std::sqrt(1.0f - beta);
    const float eps_coef = beta / std::sqrt(1.0f - s.alpha_bars[(size_t)t]);
    const float sigma = t > 0 ? std::sqrt(beta) : 0.0f;
    Tensor out(x_t.shape());
    const float* px = x_t.data();
    const float* pe = eps_hat.data();
    const float* pn = noise.data();
    float* po = out.data();
    for (size_t i = 0; i < out.numel(); ++i)
        po[i] = inv_sqrt_alpha * (px[i] - eps_coef * pe[i]) + sigma * pn[i];
    return out;
}

Tensor ddim_step(const Tensor& x_t, int t, int t_prev, const Tensor& eps_hat,
                 const NoiseSchedule& s) {
    require_same_shape(x_t, eps_hat, "ddim_step");
    check_step(t, s);
    if (t_prev >= t) throw ConfigError("ddim_step: t_prev must be < t");
    if (t_prev < -1) throw ConfigError("ddim_step: t_prev must be >= -1");
    const float abar_t = s.alpha_bars[(size_t)t];
    const float abar_p = s.alpha_bar_at(t_prev);
    const float inv_sqrt_abar = 1.0f / std::sqrt(abar_t);
    const float sq_one_minus_t = std::sqrt(1.0f - abar_t);
    const float sq_abar_p = std::sqrt(abar_p);
    const float sq_one_minus_p = std::sqrt(1.0f - abar_p);
    Tensor out(x_t.shape());
    const float* px = x_t.data();
    const float* pe = eps_hat.data();
    float* po = out.data();
    for (size_t i = 0; i < out.numel(); ++i) {
        const float x0_hat = (px[i] - sq_one_minus_t * pe[i]) * inv_sqrt_abar;
        po[i] = sq_abar_p * x0_hat + sq_one_minus_p * pe[i];
    }
    return out;
}

SampleMode parse_sample_mode(const std::string& name) {
    if (name == "ancestral") return SampleMode::ancestral;
    if (name == "ddim") return SampleMode::ddim;
    throw ConfigError("unknown sample mode: " + name);
}

std::string sample_mode_name(SampleMode mode) {
    return mode == SampleMode::ancestral ? "ancestral" : "ddim";
}

std::vector<int> visited_steps(int T, int stride) {
    if (stride < 1 || stride > T)
        throw ConfigError("stride must be in [1, T]");
    std::vector<int> steps;
    const int count = (T + stride - 1) / stride;
    steps.reserve((size_t)count);
    for (int k = count - 1; k >= 0; --k) steps.push_back(k * stride);
    return steps;
}

SampleResult sample_loop(const Denoiser& denoiser, const NoiseSchedule& s,
                         int stride, SampleMode mode,
                         const std::vector<uint64_t>& seeds,
                         const std::vector<int>& image_shape,
                         const std::optional<std::set<int>>& keep) {
    if (mode == SampleMode::ancestral && stride != 1)
        throw ConfigError("ancestral sampling requires stride 1");
    if (image_shape.size() != 3)
        throw ConfigError("sample_loop: image shape must be (C,H,W)");
    const int N = (int)seeds.size();
    const int C = image_shape[0], H = image_shape[1], W = image_shape[2];
    const size_t img_elems = (size_t)C * H * W;

    // One RNG per sample: the noise stream depends only on the sample's seed,
    // not on batch composition.
    std::vector<Rng> rngs;
    rngs.reserve((size_t)N);
    for (uint64_t sd : seeds) rngs.emplace_back(sd);

    Tensor x({N, C, H, W});
    for (int n = 0; n < N; ++n) {
        float* p = x.data() + (size_t)n * img_elems;
        for (size_t i = 0; i < img_elems; ++i) p[i] = rngs[(size_t)n].normal();
    }

    SampleResult result;
    result.initial = x;

    const std::vector<int> steps = visited_steps(s.T, stride);
    for (size_t si = 0; si < steps.size(); ++si) {
        const int t = steps[si];
        if (!keep || keep->count(t)) result.trace.emplace(t, x);
        Tensor eps_hat = denoiser(x, t);
        ++result.denoiser_evals;
        if (mode == SampleMode::ddim) {
            const int t_prev = si + 1 < steps.size() ? steps[si + 1] : -1;
            x = ddim_step(x, t, t_prev, eps_hat, s);
        } else {
            Tensor noise({N, C, H, W});
            if (t > 0) {
                for (int n = 0; n < N; ++n) {
                    float* p = noise.data() + (size_t)n * img_elems;
                    for (size_t i = 0; i < img_elems; ++i)
                        p[i] = rngs[(size_t)n].normal();
                }
            }
            x = ddpm_reverse_step(x, t, eps_hat, noise, s);
        }
        if (has_nonfinite(x))
            throw NumericError("sample_loop: non-finite state at t=" + std::to_string(t));
    }
    result.final = std::move(x);
    return result;
}

SampleResult sample_loop(const Denoiser& denoiser, const NoiseSchedule& s,
                         int stride, SampleMode mode, uint64_t seed,
                         const std::vector<int>& image_shape,
                         const std::optional<std::set<int>>& keep) {
    return sample_loop(denoiser, s, stride, mode, std::vector<uint64_t>{seed},
                       image_shape, keep);
}

}  // namespace advkd::diffusion
