#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "advkd/tensor.hpp"

namespace advkd::io {

// Loose tensor files: <name>.bin holds raw little-endian float32, with a
// <name>.meta.json sidecar {"shape": [...], "dtype": "f32le", "layout": ...}.
// Layout is "chw" for rank-3 image tensors, "nd" for rank-2 matrices.

void write_tensor_blob(const std::filesystem::path& dir, const std::string& name,
                       const Tensor& t);
Tensor read_tensor_blob(const std::filesystem::path& dir, const std::string& name);

/// All blobs in a directory, sorted by file name.
std::vector<Tensor> read_blob_dir(const std::filesystem::path& dir);

}  // namespace advkd::io
