#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "advkd/tensor.hpp"

namespace advkd::io {

// Single-file model archive: magic, JSON manifest, then named float32
// blobs. Every integer in the container is unsigned 32-bit little-endian;
// blob payloads are little-endian float32. Layout:
//
//   "ADVKDAR1"
//   u32 manifest_len, manifest bytes (UTF-8 JSON)
//   u32 blob_count
//   per blob: u32 name_len, name bytes, u32 rank, u32 dims[rank], f32 data

struct Archive {
    nlohmann::json manifest;
    std::vector<std::pair<std::string, Tensor>> blobs;

    const Tensor* find(const std::string& name) const;
};

void write_archive(const std::filesystem::path& path, const nlohmann::json& manifest,
                   const std::vector<std::pair<std::string, const Tensor*>>& blobs);
Archive read_archive(const std::filesystem::path& path);

}  // namespace advkd::io
