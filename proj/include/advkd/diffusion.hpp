#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "advkd/tensor.hpp"

namespace advkd::diffusion {

/// Variance schedule of the forward process. Step indices are zero-based:
/// t in {0, ..., T-1}; alpha_bars[t] is the product of alphas[0..t].
struct NoiseSchedule {
    int T = 0;
    double beta_start = 0.0, beta_end = 0.0;
    std::vector<float> betas;
    std::vector<float> alphas;
    std::vector<float> alpha_bars;

    void validate() const;
    float alpha_bar_at(int t) const;  // alpha_bar(-1) == 1
};

NoiseSchedule make_linear_schedule(int T, double beta_start, double beta_end);

/// Lowercase hex SHA-256 of the beta array serialized as little-endian
/// float32. Identifies a schedule across artifacts.
std::string schedule_hash(const NoiseSchedule& s);

/// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps
Tensor q_sample(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& s);

/// Single Markov transition: sqrt(1-beta_t) x_{t-1} + sqrt(beta_t) eps
Tensor forward_kernel_step(const Tensor& x_prev, int t, const Tensor& eps,
                           const NoiseSchedule& s);

/// Mean squared error over all elements.
float simple_loss(const Tensor& eps_true, const Tensor& eps_pred);

/// Ancestral reverse step with epsilon parameterization and fixed variance
/// sigma_t^2 = beta_t (sigma_0 = 0).
Tensor ddpm_reverse_step(const Tensor& x_t, int t, const Tensor& eps_hat,
                         const Tensor& noise, const NoiseSchedule& s);

/// Deterministic (eta = 0) update from step t to t_prev; t_prev == -1 means
/// fully denoised (alpha_bar == 1).
Tensor ddim_step(const Tensor& x_t, int t, int t_prev, const Tensor& eps_hat,
                 const NoiseSchedule& s);

enum class SampleMode { ancestral, ddim };

SampleMode parse_sample_mode(const std::string& name);
std::string sample_mode_name(SampleMode mode);

/// Batched denoiser: x is (N,C,H,W), all samples share the timestep.
using Denoiser = std::function<Tensor(const Tensor& x, int t)>;

/// Step indices visited for the given stride: descending multiples of
/// stride below T.
std::vector<int> visited_steps(int T, int stride);

struct SampleResult {
    Tensor initial;                // seeded x_T, (N,C,H,W)
    Tensor final;                  // (N,C,H,W)
    std::map<int, Tensor> trace;   // step index -> state at that step
    int denoiser_evals = 0;
};

/// Runs the reverse process from seeded standard-normal noise down to the
/// final image. Each batch element draws its noise stream from its own seed,
/// so results are identical whether samples are run alone or batched.
/// `keep` filters which visited steps are stored in the trace (all when
/// nullopt).
SampleResult sample_loop(const Denoiser& denoiser, const NoiseSchedule& s,
                         int stride, SampleMode mode,
                         const std::vector<uint64_t>& seeds,
                         const std::vector<int>& image_shape,
                         const std::optional<std::set<int>>& keep = std::nullopt);

/// Single-sample convenience wrapper.
SampleResult sample_loop(const Denoiser& denoiser, const NoiseSchedule& s,
                         int stride, SampleMode mode, uint64_t seed,
                         const std::vector<int>& image_shape,
                         const std::optional<std::set<int>>& keep = std::nullopt);

}  // namespace advkd::diffusion
