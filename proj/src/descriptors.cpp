#include "wildmatch/descriptors.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace wildmatch {

namespace {

constexpr char kMagic[4] = {'W', 'D', 'D', 'S'};
constexpr uint16_t kVersion = 1;

template <typename T>
void write_le(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw FormatError("descriptor file: unexpected end of data");
    return value;
}

}  // namespace

void write_descriptors(const std::vector<DescriptorSet>& sets,
                       const std::string& path) {
    if (sets.empty()) throw PreconditionError("write_descriptors: empty collection");
    const size_t d = sets.front().dim;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out.write(kMagic, 4);
    write_le<uint16_t>(out, kVersion);
    write_le<uint32_t>(out, static_cast<uint32_t>(d));
    write_le<uint64_t>(out, static_cast<uint64_t>(sets.size()));
    for (const DescriptorSet& s : sets) {
        if (s.dim != d) {
            throw ShapeError("write_descriptors: mixed descriptor widths (" +
                             std::to_string(s.dim) + " vs " + std::to_string(d) + ")");
        }
        write_le<uint32_t>(out, static_cast<uint32_t>(s.image_id.size()));
        out.write(s.image_id.data(), static_cast<std::streamsize>(s.image_id.size()));
        write_le<uint32_t>(out, static_cast<uint32_t>(s.count));
        out.write(reinterpret_cast<const char*>(s.data.data()),
                  static_cast<std::streamsize>(s.data.size() * sizeof(float)));
    }
    if (!out) throw Error("failed writing '" + path + "'");
}

std::vector<DescriptorSet> read_descriptors(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("'" + path + "' is not a WDDS descriptor file");
    }
    uint16_t version = read_le<uint16_t>(in);
    if (version != kVersion) {
        throw FormatError("'" + path + "': unsupported WDDS version " +
                          std::to_string(version));
    }
    uint32_t d = read_le<uint32_t>(in);
    uint64_t n_images = read_le<uint64_t>(in);
    std::vector<DescriptorSet> sets;
    sets.reserve(n_images);
    for (uint64_t i = 0; i < n_images; ++i) {
        DescriptorSet s;
        uint32_t len = read_le<uint32_t>(in);
        s.image_id.resize(len);
        in.read(s.image_id.data(), len);
        s.count = read_le<uint32_t>(in);
        s.dim = d;
        s.data.resize(s.count * d);
        in.read(reinterpret_cast<char*>(s.data.data()),
                static_cast<std::streamsize>(s.data.size() * sizeof(float)));
        if (!in) throw FormatError("'" + path + "': truncated descriptor payload");
        for (float v : s.data) {
            if (std::isnan(v)) {
                throw FormatError("'" + path + "': NaN descriptor in image '" +
                                  s.image_id + "'");
            }
        }
        sets.push_back(std::move(s));
    }
    return sets;
}

}  // namespace wildmatch
