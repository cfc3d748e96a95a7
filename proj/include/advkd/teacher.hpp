#pragma once

#include <filesystem>
#include <memory>
#include <set>
#include <vector>

#include "advkd/diffusion.hpp"
#include "advkd/nn.hpp"
#include "advkd/tensor.hpp"

namespace advkd::teacher {

struct TeacherConfig {
    int image_resolution = 32;
    int channels = 3;
    int base_width = 32;
    std::vector<int> channel_multipliers = {1, 2};
    int time_embedding_dim = 64;
    int T = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;

    void validate() const;
    diffusion::NoiseSchedule schedule() const;
};

/// Epsilon-predicting U-Net: per-level conv blocks with additive time
/// embedding, stride-2 downsampling, nearest-neighbor upsampling and skip
/// concatenation. The output head is zero-initialized so the untrained
/// model predicts zero noise.
class TeacherUNet {
public:
    TeacherUNet(const TeacherConfig& cfg, uint64_t init_seed);
    TeacherUNet(const TeacherUNet&) = delete;
    TeacherUNet& operator=(const TeacherUNet&) = delete;

    /// x: (N,C,H,W); t: one step index per sample.
    Tensor forward(const Tensor& x, const std::vector<int>& t, bool cache);
    /// Accumulates parameter gradients from the cached forward.
    void backward(const Tensor& grad_out);

    void visit_params(const nn::ParamFn& fn);
    void visit_state(const nn::StateFn& fn);
    std::vector<nn::Param*> params();
    size_t param_count();

    diffusion::Denoiser as_denoiser();

    const TeacherConfig& config() const { return cfg_; }

private:
    struct TimeBlock {
        nn::Conv2d conv1, conv2;
        nn::Linear temb_proj;
        Tensor s1_cache, a2_cache;

        TimeBlock() = default;
        TimeBlock(const std::string& name, int cin, int cout, int temb_dim);
        Tensor forward(const Tensor& x, const Tensor& temb, bool cache);
        Tensor backward(const Tensor& gy, Tensor& temb_grad);
        void init(Rng& rng);
    };

    TeacherConfig cfg_;
    std::vector<int> widths_;
    nn::Linear time_lin1_, time_lin2_;
    nn::Conv2d conv_in_, conv_out_;
    std::vector<TimeBlock> enc_, dec_;
    std::vector<nn::Conv2d> down_, up_conv_;
    TimeBlock mid_;

    // forward caches
    Tensor temb_a1_;
    std::vector<Tensor> skip_cache_;

    template <typename F>
    void for_each_layer(F&& f);
};

struct TrainReport {
    std::vector<float> losses;
    int steps = 0;
};

/// Minimizes the epsilon-prediction MSE over uniformly sampled timesteps
/// with Adam. Dataset images are (C,H,W) in [-1,1].
TrainReport train_teacher(TeacherUNet& model, const std::vector<Tensor>& dataset,
                          const diffusion::NoiseSchedule& schedule, int steps,
                          int batch_size, float lr, uint64_t seed);

struct TrajectoryRecord {
    uint64_t seed = 0;
    Tensor noise;                        // x_T, (C,H,W)
    std::map<int, Tensor> intermediates; // step index -> x_t
    Tensor final;                        // (C,H,W)
};

/// Runs the sampler and keeps the requested intermediate states. Throws if
/// a requested step is not visited under the chosen mode/stride.
TrajectoryRecord sample_with_trace(TeacherUNet& model,
                                   const diffusion::NoiseSchedule& schedule,
                                   const std::set<int>& record_steps,
                                   diffusion::SampleMode mode, int stride,
                                   uint64_t seed);

/// Batched form: one record per seed, identical to running each alone.
std::vector<TrajectoryRecord> sample_with_trace_batch(
    TeacherUNet& model, const diffusion::NoiseSchedule& schedule,
    const std::set<int>& record_steps, diffusion::SampleMode mode, int stride,
    const std::vector<uint64_t>& seeds);

struct TeacherCheckpoint {
    TeacherConfig config;
    int training_step = 0;
    std::string schedule_hash;
    std::unique_ptr<TeacherUNet> model;
};

void save_teacher(const std::filesystem::path& path, TeacherUNet& model,
                  int training_step);
TeacherCheckpoint load_teacher(const std::filesystem::path& path);

}  // namespace advkd::teacher
