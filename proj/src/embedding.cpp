#include "wildmatch/embedding.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace wildmatch {

namespace {

constexpr char kMagic[4] = {'W', 'D', 'E', 'M'};
constexpr uint16_t kVersion = 1;

template <typename T>
void write_le(std::ostream& out, T value) {
    // Little-endian on all supported targets.
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw FormatError("embedding file: unexpected end of data");
    return value;
}

}  // namespace

void EmbeddingMatrix::validate() const {
    if (n_ == 0 || d_ == 0) {
        throw ShapeError("embedding matrix must have N >= 1 and D >= 1");
    }
    for (size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i])) {
            throw FormatError("embedding matrix contains a non-finite value at row " +
                              std::to_string(i / d_));
        }
    }
}

EmbeddingMatrix normalize(const EmbeddingMatrix& m) {
    EmbeddingMatrix out = m;
    for (size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        double norm_sq = 0.0;
        for (float v : r) norm_sq += static_cast<double>(v) * v;
        double norm = std::sqrt(norm_sq);
        if (norm == 0.0) {
            throw PreconditionError("normalize: row " + std::to_string(i) +
                                    " has zero norm");
        }
        float inv = static_cast<float>(1.0 / norm);
        for (float& v : r) v *= inv;
    }
    out.set_normalized(true);
    return out;
}

void write_embeddings(const EmbeddingMatrix& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out.write(kMagic, 4);
    write_le<uint16_t>(out, kVersion);
    write_le<uint32_t>(out, static_cast<uint32_t>(m.dim()));
    write_le<uint64_t>(out, static_cast<uint64_t>(m.rows()));
    out.write(reinterpret_cast<const char*>(m.data().data()),
              static_cast<std::streamsize>(m.data().size() * sizeof(float)));
    for (const std::string& id : m.row_ids()) {
        write_le<uint32_t>(out, static_cast<uint32_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
    }
    if (!out) throw Error("failed writing '" + path + "'");
}

EmbeddingMatrix read_embeddings(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("'" + path + "' is not a WDEM embedding file");
    }
    uint16_t version = read_le<uint16_t>(in);
    if (version != kVersion) {
        throw FormatError("'" + path + "': unsupported WDEM version " +
                          std::to_string(version));
    }
    uint32_t d = read_le<uint32_t>(in);
    uint64_t n = read_le<uint64_t>(in);
    if (d == 0 || n == 0) throw FormatError("'" + path + "': empty matrix");
    EmbeddingMatrix m(n, d);
    in.read(reinterpret_cast<char*>(m.data().data()),
            static_cast<std::streamsize>(m.data().size() * sizeof(float)));
    if (!in) throw FormatError("'" + path + "': truncated matrix payload");
    for (uint64_t i = 0; i < n; ++i) {
        uint32_t len = read_le<uint32_t>(in);
        std::string id(len, '\0');
        in.read(id.data(), len);
        if (!in) throw FormatError("'" + path + "': truncated row id table");
        m.row_ids()[i] = std::move(id);
    }
    m.validate();
    return m;
}

}  // namespace wildmatch
