#include "advkd/blob_io.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "advkd/error.hpp"

namespace advkd::io {

namespace {
std::string layout_for_rank(int rank) {
    if (rank == 3) return "chw";
    if (rank == 2) return "nd";
    return "flat";
}
}  // namespace

void write_tensor_blob(const std::filesystem::path& dir, const std::string& name,
                       const Tensor& t) {
    std::filesystem::create_directories(dir);
    const auto bin = dir / (name + ".bin");
    std::ofstream os(bin, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write blob: " + bin.string());
    os.write(reinterpret_cast<const char*>(t.data()),
             (std::streamsize)(t.numel() * sizeof(float)));
    if (!os) throw DataError("blob write failed: " + bin.string());

    nlohmann::json meta;
    meta["shape"] = t.shape();
    meta["dtype"] = "f32le";
    meta["layout"] = layout_for_rank(t.rank());
    std::ofstream ms(dir / (name + ".meta.json"), std::ios::trunc);
    ms << meta.dump(2) << "\n";
    if (!ms) throw DataError("meta write failed: " + name);
}

Tensor read_tensor_blob(const std::filesystem::path& dir, const std::string& name) {
    const auto metap = dir / (name + ".meta.json");
    std::ifstream ms(metap);
    if (!ms) throw DataError("missing blob meta: " + metap.string());
    nlohmann::json meta = nlohmann::json::parse(ms, nullptr, false);
    if (meta.is_discarded()) throw DataError("bad blob meta: " + metap.string());
    if (meta.value("dtype", "") != "f32le")
        throw DataError("unsupported blob dtype in " + metap.string());
    std::vector<int> shape = meta.at("shape").get<std::vector<int>>();
    size_t numel = 1;
    for (int d : shape) numel *= (size_t)d;

    const auto bin = dir / (name + ".bin");
    std::ifstream is(bin, std::ios::binary);
    if (!is) throw DataError("missing blob: " + bin.string());
    std::vector<float> data(numel);
    is.read(reinterpret_cast<char*>(data.data()),
            (std::streamsize)(numel * sizeof(float)));
    if (!is) throw DataError("truncated blob: " + bin.string());
    return Tensor::from_data(std::move(shape), std::move(data));
}

std::vector<Tensor> read_blob_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw DataError("not a directory: " + dir.string());
    std::vector<std::string> names;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        const std::string fn = e.path().filename().string();
        if (fn.size() > 4 && fn.ends_with(".bin"))
            names.push_back(fn.substr(0, fn.size() - 4));
    }
    std::sort(names.begin(), names.end());
    std::vector<Tensor> out;
    out.reserve(names.size());
    for (const auto& n : names) out.push_back(read_tensor_blob(dir, n));
    return out;
}

}  // namespace advkd::io
