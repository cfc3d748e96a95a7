#pragma once

#include <vector>

#include <json.hpp>

namespace advkd::traj {

/// teacher_t value marking the image-producing stage supervised by the
/// teacher's final output.
constexpr int kFinalStage = -1;

struct StageSpec {
    int n = 0;                    // stage index within the plan
    int teacher_t = kFinalStage;  // supervising teacher step, or kFinalStage
    int resolution = 0;           // output resolution of the stage
    bool upsamples_input = false; // true exactly when n is even
    int batch_size = 0;
    int feature_channels = 0;
};

/// Stage family of the student. `entries` is in application order: internal
/// stages by descending n (descending teacher timestep, noisiest first),
/// then the image-producing final stage (n = num_stages-1) at full
/// resolution.
struct StagePlan {
    int num_stages = 0;
    int base_resolution = 0;
    int full_resolution = 0;
    int latent_channels = 0;
    std::vector<StageSpec> entries;

    const StageSpec& final_stage() const { return entries.back(); }
    const StageSpec& by_n(int n) const;
    /// Position in application order of stage n.
    int application_index(int n) const;
    void validate() const;

    nlohmann::json to_json() const;
    static StagePlan from_json(const nlohmann::json& j);
};

/// Supervising teacher timestep of internal stage n: 190n - 10n^2 + 80,
/// defined for 0 <= n <= 10.
int stage_timestep(int n);

StagePlan build_stage_plan(int num_stages, int base_resolution,
                           int full_resolution, int latent_channels = 256);

}  // namespace advkd::traj
