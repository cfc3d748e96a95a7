#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "advkd/stage_plan.hpp"
#include "advkd/teacher.hpp"
#include "advkd/tensor.hpp"

namespace advkd::traj {

using teacher::TrajectoryRecord;

/// Area-average downsampling to the target resolution; identity when the
/// resolutions already match. Input is (C,H,W) with H == W.
Tensor downsample_psi(const Tensor& x, int target_resolution);

struct DatasetManifest {
    int schema_version = 1;
    std::string schedule_hash;
    std::string mode;  // "ancestral" | "ddim"
    int stride = 1;
    StagePlan plan;
    std::vector<uint64_t> record_seeds;
    std::filesystem::path root;  // directory holding manifest.json
};

/// Samples `count` teacher trajectories (seeds seed_base..seed_base+count-1),
/// persists each record under <out_dir>/records/<seed>/ and writes
/// <out_dir>/manifest.json. Records only the plan's supervising steps.
DatasetManifest generate_dataset(teacher::TeacherUNet& model,
                                 const diffusion::NoiseSchedule& schedule,
                                 const StagePlan& plan, int count,
                                 diffusion::SampleMode mode, int stride,
                                 uint64_t seed_base,
                                 const std::filesystem::path& out_dir,
                                 bool overwrite = false, int workers = 1);

DatasetManifest load_manifest(const std::filesystem::path& dir);
TrajectoryRecord load_record(const DatasetManifest& m, uint64_t seed);

struct SupervisionSample {
    int stage_n = 0;
    Tensor target;  // stage-resolution image
    std::string source_record;
};

/// Epoch-based sampler over the dataset for one stage: draws records
/// without replacement until the epoch is exhausted, then reshuffles.
/// Targets are the stage's teacher intermediates (or finals) downsampled
/// to the stage resolution; they are precomputed once at construction.
class SupervisionSampler {
public:
    SupervisionSampler(const DatasetManifest& m, int stage_n, int batch_size,
                       uint64_t seed);
    std::vector<SupervisionSample> next_batch();
    /// Batch stacked into a (B,C,R,R) tensor.
    Tensor next_batch_tensor();
    int dataset_size() const { return (int)targets_.size(); }

private:
    int stage_n_;
    int batch_size_;
    std::vector<Tensor> targets_;
    std::vector<std::string> names_;
    Rng rng_;
    std::vector<int> order_;
    size_t cursor_ = 0;

    void reshuffle();
};

/// One-shot spec surface over SupervisionSampler.
std::vector<SupervisionSample> load_supervision_batch(const DatasetManifest& m,
                                                      int stage_n, int batch_size,
                                                      uint64_t rng_seed);

}  // namespace advkd::traj
