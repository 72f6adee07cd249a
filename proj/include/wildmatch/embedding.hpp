#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wildmatch/common.hpp"

namespace wildmatch {

/// Dense N x D matrix of 32-bit float embeddings, one image per row.
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;
    EmbeddingMatrix(size_t n, size_t d)
        : n_(n), d_(d), data_(n * d, 0.0f), row_ids_(n) {}

    size_t rows() const { return n_; }
    size_t dim() const { return d_; }
    bool normalized() const { return normalized_; }
    void set_normalized(bool v) { normalized_ = v; }

    std::span<float> row(size_t i) { return {data_.data() + i * d_, d_}; }
    std::span<const float> row(size_t i) const { return {data_.data() + i * d_, d_}; }
    const std::vector<float>& data() const { return data_; }
    std::vector<float>& data() { return data_; }

    const std::vector<std::string>& row_ids() const { return row_ids_; }
    std::vector<std::string>& row_ids() { return row_ids_; }

    /// Throws ShapeError on empty matrix, FormatError on NaN/Inf entries.
    void validate() const;

private:
    size_t n_ = 0;
    size_t d_ = 0;
    std::vector<float> data_;
    std::vector<std::string> row_ids_;
    bool normalized_ = false;
};

/// Row-wise L2 normalization. Throws PreconditionError naming the first
/// zero-norm row.
EmbeddingMatrix normalize(const EmbeddingMatrix& m);

/// "WDEM" container: magic, version u16, D u32, N u64, N*D little-endian
/// f32 row-major, then N length-prefixed (u32) UTF-8 row ids.
void write_embeddings(const EmbeddingMatrix& m, const std::string& path);
EmbeddingMatrix read_embeddings(const std::string& path);

struct Neighbor {
    uint32_t index;
    float score;
};

/// Per query row: k neighbors, descending score, ties by ascending index.
struct TopKResult {
    size_t k = 0;
    std::vector<std::vector<Neighbor>> rows;
};

/// Exact blocked top-k cosine-similarity search. Both matrices must be
/// normalized and share D; 1 <= k <= reference rows. threads == 0 picks the
/// hardware count; results are identical for any thread count.
TopKResult topk(const EmbeddingMatrix& query, const EmbeddingMatrix& reference,
                size_t k, unsigned threads = 0);

}  // namespace wildmatch
