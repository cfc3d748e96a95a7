#include "advkd/stage_plan.hpp"

#include <algorithm>

#include "advkd/error.hpp"

namespace advkd::traj {

int stage_timestep(int n) {
    if (n < 0 || n > 10)
        throw ConfigError("stage_timestep: n must be in [0,10], got " +
                          std::to_string(n));
    return 190 * n - 10 * n * n + 80;
}

const StageSpec& StagePlan::by_n(int n) const {
    for (const auto& e : entries)
        if (e.n == n) return e;
    throw ConfigError("stage " + std::to_string(n) + " not in plan");
}

int StagePlan::application_index(int n) const {
    for (size_t i = 0; i < entries.size(); ++i)
        if (entries[i].n == n) return (int)i;
    throw ConfigError("stage " + std::to_string(n) + " not in plan");
}

void StagePlan::validate() const {
    if (num_stages < 2) throw ConfigError("plan: need at least 2 stages");
    if ((int)entries.size() != num_stages)
        throw ConfigError("plan: entry count mismatch");
    std::vector<bool> seen((size_t)num_stages, false);
    for (const auto& e : entries) {
        if (e.n < 0 || e.n >= num_stages) throw ConfigError("plan: stage index out of range");
        if (seen[(size_t)e.n]) throw ConfigError("plan: duplicate stage index");
        seen[(size_t)e.n] = true;
        if (e.upsamples_input != (e.n % 2 == 0))
            throw ConfigError("plan: upsample flag must hold exactly at even n");
        if (e.batch_size != 64 && e.batch_size != 32 && e.batch_size != 16)
            throw ConfigError("plan: batch size must be one of 64/32/16");
    }
    if (entries.back().teacher_t != kFinalStage)
        throw ConfigError("plan: final entry must be the image-producing stage");
    if (entries.back().resolution != full_resolution)
        throw ConfigError("plan: final stage must run at full resolution");
    // Internal stages appear in descending-n order and never shrink.
    for (size_t i = 0; i + 2 < entries.size(); ++i) {
        if (entries[i].n != entries[i + 1].n + 1)
            throw ConfigError("plan: internal stages must descend by n");
        if (entries[i].resolution > entries[i + 1].resolution)
            throw ConfigError("plan: resolution decreases along application order");
    }
    int cur = base_resolution;
    for (const auto& e : entries) {
        if (e.upsamples_input) cur *= 2;
        if (e.resolution != cur) throw ConfigError("plan: inconsistent resolution ladder");
    }
    if (cur != full_resolution)
        throw ConfigError("plan: ladder does not reach full resolution");
}

nlohmann::json StagePlan::to_json() const {
    nlohmann::json j;
    j["num_stages"] = num_stages;
    j["base_resolution"] = base_resolution;
    j["full_resolution"] = full_resolution;
    j["latent_channels"] = latent_channels;
    j["entries"] = nlohmann::json::array();
    for (const auto& e : entries)
        j["entries"].push_back({{"n", e.n},
                                {"teacher_t", e.teacher_t},
                                {"resolution", e.resolution},
                                {"upsamples_input", e.upsamples_input},
                                {"batch_size", e.batch_size},
                                {"feature_channels", e.feature_channels}});
    return j;
}

StagePlan StagePlan::from_json(const nlohmann::json& j) {
    StagePlan p;
    p.num_stages = j.at("num_stages").get<int>();
    p.base_resolution = j.at("base_resolution").get<int>();
    p.full_resolution = j.at("full_resolution").get<int>();
    p.latent_channels = j.at("latent_channels").get<int>();
    for (const auto& ej : j.at("entries")) {
        StageSpec e;
        e.n = ej.at("n").get<int>();
        e.teacher_t = ej.at("teacher_t").get<int>();
        e.resolution = ej.at("resolution").get<int>();
        e.upsamples_input = ej.at("upsamples_input").get<bool>();
        e.batch_size = ej.at("batch_size").get<int>();
        e.feature_channels = ej.at("feature_channels").get<int>();
        p.entries.push_back(e);
    }
    p.validate();
    return p;
}

StagePlan build_stage_plan(int num_stages, int base_resolution, int full_resolution,
                           int latent_channels) {
    if (num_stages < 2 || num_stages > 12)
        throw ConfigError("build_stage_plan: num_stages must be in [2,12]");
    if (base_resolution < 1 || latent_channels < 4)
        throw ConfigError("build_stage_plan: bad base resolution or latent width");

    StagePlan p;
    p.num_stages = num_stages;
    p.base_resolution = base_resolution;
    p.full_resolution = full_resolution;
    p.latent_channels = latent_channels;

    // Application order: internal stages n = num_stages-2 .. 0, then the
    // final image stage n = num_stages-1.
    std::vector<int> order;
    for (int n = num_stages - 2; n >= 0; --n) order.push_back(n);
    order.push_back(num_stages - 1);

    int cur_res = base_resolution;
    int cur_ch = latent_channels;
    int doublings = 0;
    for (size_t idx = 0; idx < order.size(); ++idx) {
        StageSpec e;
        e.n = order[idx];
        const bool is_final = e.n == num_stages - 1;
        e.teacher_t = is_final ? kFinalStage : stage_timestep(e.n);
        e.upsamples_input = e.n % 2 == 0;
        if (e.upsamples_input) {
            cur_res *= 2;
            cur_ch = std::max(4, cur_ch / 2);
            ++doublings;
        }
        e.resolution = cur_res;
        e.feature_channels = cur_ch;
        // Per-stage batch sizes follow training order: 64 for the first
        // eight stages, 32 for the ninth, 16 afterwards.
        e.batch_size = idx < 8 ? 64 : (idx == 8 ? 32 : 16);
        p.entries.push_back(e);
    }
    if (cur_res != full_resolution)
        throw ConfigError("build_stage_plan: inconsistent resolution ladder: " +
                          std::to_string(base_resolution) + " with " +
                          std::to_string(doublings) + " doublings reaches " +
                          std::to_string(cur_res) + ", not " +
                          std::to_string(full_resolution));
    p.validate();
    return p;
}

}  // namespace advkd::traj
