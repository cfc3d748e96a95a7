#include "advkd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "advkd/error.hpp"

namespace advkd::io {

static_assert(std::endian::native == std::endian::little,
              "archive container assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'A', 'D', 'V', 'K', 'D', 'A', 'R', '1'};

void write_u32(std::ofstream& os, uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}

uint32_t read_u32(std::ifstream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    if (!is) throw DataError("archive: truncated file");
    return v;
}

}  // namespace

const Tensor* Archive::find(const std::string& name) const {
    for (const auto& [n, t] : blobs)
        if (n == name) return &t;
    return nullptr;
}

void write_archive(const std::filesystem::path& path, const nlohmann::json& manifest,
                   const std::vector<std::pair<std::string, const Tensor*>>& blobs) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open for writing: " + path.string());
    os.write(kMagic, sizeof(kMagic));
    const std::string m = manifest.dump();
    write_u32(os, (uint32_t)m.size());
    os.write(m.data(), (std::streamsize)m.size());
    write_u32(os, (uint32_t)blobs.size());
    for (const auto& [name, tensor] : blobs) {
        write_u32(os, (uint32_t)name.size());
        os.write(name.data(), (std::streamsize)name.size());
        write_u32(os, (uint32_t)tensor->rank());
        for (int d : tensor->shape()) write_u32(os, (uint32_t)d);
        os.write(reinterpret_cast<const char*>(tensor->data()),
                 (std::streamsize)(tensor->numel() * sizeof(float)));
    }
    if (!os) throw DataError("archive write failed: " + path.string());
}

Archive read_archive(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open archive: " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw DataError("not an advkd archive: " + path.string());
    Archive a;
    const uint32_t mlen = read_u32(is);
    std::string m((size_t)mlen, '\0');
    is.read(m.data(), mlen);
    if (!is) throw DataError("archive: truncated manifest");
    a.manifest = nlohmann::json::parse(m, nullptr, false);
    if (a.manifest.is_discarded()) throw DataError("archive: bad manifest JSON");
    const uint32_t count = read_u32(is);
    a.blobs.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t nlen = read_u32(is);
        std::string name((size_t)nlen, '\0');
        is.read(name.data(), nlen);
        const uint32_t rank = read_u32(is);
        if (rank > 8) throw DataError("archive: implausible blob rank");
        std::vector<int> shape((size_t)rank);
        size_t numel = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            shape[d] = (int)read_u32(is);
            numel *= (size_t)shape[d];
        }
        std::vector<float> data(numel);
        is.read(reinterpret_cast<char*>(data.data()),
                (std::streamsize)(numel * sizeof(float)));
        if (!is) throw DataError("archive: truncated blob " + name);
        a.blobs.emplace_back(std::move(name),
                             Tensor::from_data(std::move(shape), std::move(data)));
    }
    return a;
}

}  // namespace advkd::io
