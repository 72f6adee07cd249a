#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

#include "wildmatch/embedding.hpp"
#include "knn_exact.hpp"

namespace wildmatch {

namespace {

// Compiled with -O3 -ffast-math so the reduction vectorizes. The accumulation
// order (and hence the last-ulp rounding) of this kernel depends on the build,
// so it is only used to shortlist candidates; the reported scores and the
// final ordering always come from detail::exact_dot.
float dot(const float* __restrict a, const float* __restrict b, size_t d) {
    float acc = 0.0f;
    for (size_t i = 0; i < d; ++i) acc += a[i] * b[i];
    return acc;
}

// candidate strictly better than incumbent: higher score, then lower index
bool better(float score, uint32_t index, const Neighbor& incumbent) {
    return score > incumbent.score ||
           (score == incumbent.score && index < incumbent.index);
}

// Min-heap on quality: top() is the current worst of the kept k.
struct WorstOnTop {
    bool operator()(const Neighbor& a, const Neighbor& b) const {
        return better(a.score, a.index, b);
    }
};

constexpr size_t kQueryTile = 16;
constexpr size_t kReferenceTile = 512;

// Extra candidates kept beyond k, and an upper bound on how far a fast-math
// dot can drift from the exact one (inputs are unit rows, so the reassociation
// error is bounded by d * eps, well under this).
constexpr size_t kSlack = 16;
constexpr float kFastTol = 1e-3f;

void heap_offer(std::vector<Neighbor>& heap, size_t k, uint32_t index, float score) {
    if (heap.size() < k) {
        heap.push_back({index, score});
        std::push_heap(heap.begin(), heap.end(), WorstOnTop{});
    } else if (better(score, index, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), WorstOnTop{});
        heap.back() = {index, score};
        std::push_heap(heap.begin(), heap.end(), WorstOnTop{});
    }
}

// One tile of queries against the whole reference set. Reference rows are
// walked in tiles so a tile stays cache-resident across all queries of the
// query tile.
void search_tile(const EmbeddingMatrix& query, const EmbeddingMatrix& reference,
                 size_t q0, size_t q1, size_t k,
                 std::vector<std::vector<Neighbor>>& rows) {
    const size_t d = query.dim();
    const size_t n_ref = reference.rows();
    const size_t k2 = std::min(k + kSlack, n_ref);

    for (size_t q = q0; q < q1; ++q) rows[q].reserve(k2);
    for (size_t r0 = 0; r0 < n_ref; r0 += kReferenceTile) {
        size_t r1 = std::min(r0 + kReferenceTile, n_ref);
        for (size_t q = q0; q < q1; ++q) {
            const float* q_row = query.row(q).data();
            std::vector<Neighbor>& heap = rows[q];
            for (size_t r = r0; r < r1; ++r) {
                float score = dot(q_row, reference.row(r).data(), d);
                heap_offer(heap, k2, static_cast<uint32_t>(r), score);
            }
        }
    }

    auto by_quality = [](const Neighbor& a, const Neighbor& b) {
        return a.score != b.score ? a.score > b.score : a.index < b.index;
    };
    for (size_t q = q0; q < q1; ++q) {
        std::vector<Neighbor>& kept = rows[q];
        const float* q_row = query.row(q).data();
        // worst fast score that made the shortlist; anything excluded scored
        // at most this, so its exact score is below t_fast + kFastTol
        bool shortlist = kept.size() < n_ref;
        float t_fast = shortlist ? kept.front().score : 0.0f;
        for (Neighbor& nb : kept) {
            nb.score = detail::exact_dot(q_row, reference.row(nb.index).data(), d);
        }
        std::sort(kept.begin(), kept.end(), by_quality);
        if (shortlist && !(kept[k - 1].score > t_fast + kFastTol)) {
            // the margin cannot rule out an excluded reference: rescore all
            kept.resize(n_ref);
            for (size_t r = 0; r < n_ref; ++r) {
                kept[r] = {static_cast<uint32_t>(r),
                           detail::exact_dot(q_row, reference.row(r).data(), d)};
            }
            std::sort(kept.begin(), kept.end(), by_quality);
        }
        kept.resize(k);
    }
}

}  // namespace

TopKResult topk(const EmbeddingMatrix& query, const EmbeddingMatrix& reference,
                size_t k, unsigned threads) {
    query.validate();
    reference.validate();
    if (query.dim() != reference.dim()) {
        throw ShapeError("topk: query dim " + std::to_string(query.dim()) +
                         " != reference dim " + std::to_string(reference.dim()));
    }
    if (!query.normalized() || !reference.normalized()) {
        throw PreconditionError("topk: both matrices must be normalized");
    }
    if (k < 1 || k > reference.rows()) {
        throw PreconditionError("topk: k must lie in [1, reference rows]");
    }
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }

    TopKResult result;
    result.k = k;
    result.rows.resize(query.rows());

    const size_t n_tiles = (query.rows() + kQueryTile - 1) / kQueryTile;
    std::atomic<size_t> next_tile{0};
    auto worker = [&] {
        for (;;) {
            size_t tile = next_tile.fetch_add(1);
            if (tile >= n_tiles) break;
            size_t q0 = tile * kQueryTile;
            size_t q1 = std::min(q0 + kQueryTile, query.rows());
            search_tile(query, reference, q0, q1, k, result.rows);
        }
    };

    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return result;
}

}  // namespace wildmatch
