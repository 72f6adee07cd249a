#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "wildmatch/embedding.hpp"

using namespace wildmatch;

namespace {

EmbeddingMatrix random_unit(size_t n, size_t d, uint64_t seed) {
    Rng rng(seed);
    EmbeddingMatrix m(n, d);
    for (size_t i = 0; i < n; ++i) {
        double norm = 0.0;
        std::vector<double> v(d);
        for (size_t k = 0; k < d; ++k) {
            v[k] = rng.gaussian();
            norm += v[k] * v[k];
        }
        norm = std::sqrt(norm);
        for (size_t k = 0; k < d; ++k) {
            m.row(i)[k] = static_cast<float>(v[k] / norm);
        }
        m.row_ids()[i] = "r" + std::to_string(i);
    }
    m.set_normalized(true);
    return m;
}

void check_equals_oracle(const TopKResult& fast, const TopKResult& naive) {
    REQUIRE(fast.rows.size() == naive.rows.size());
    for (size_t q = 0; q < fast.rows.size(); ++q) {
        REQUIRE(fast.rows[q].size() == naive.rows[q].size());
        for (size_t i = 0; i < fast.rows[q].size(); ++i) {
            CHECK(fast.rows[q][i].index == naive.rows[q][i].index);
            CHECK(std::fabs(fast.rows[q][i].score - naive.rows[q][i].score) <= 1e-6f);
        }
    }
}

}  // namespace

TEST_CASE("normalize scales rows to unit norm") {
    EmbeddingMatrix m(2, 2);
    m.row(0)[0] = 3.0f;
    m.row(0)[1] = 4.0f;
    m.row(1)[0] = 1.0f;
    m.row(1)[1] = 0.0f;
    EmbeddingMatrix n = normalize(m);
    CHECK(n.row(0)[0] == doctest::Approx(0.6f));
    CHECK(n.row(0)[1] == doctest::Approx(0.8f));
    CHECK(n.row(1)[0] == 1.0f);
    CHECK(n.row(1)[1] == 0.0f);
    CHECK(n.normalized());
}

TEST_CASE("normalize rejects a zero row and names it") {
    EmbeddingMatrix m(2, 2);
    m.row(0)[0] = 1.0f;
    CHECK_THROWS_WITH_AS(normalize(m), doctest::Contains("row 1"), PreconditionError);
}

TEST_CASE("topk on an orthonormal reference") {
    EmbeddingMatrix ref(3, 3);
    for (size_t i = 0; i < 3; ++i) ref.row(i)[i] = 1.0f;
    ref.set_normalized(true);
    EmbeddingMatrix q(2, 3);
    q.row(0)[2] = 1.0f;                       // equals e3
    q.row(1)[0] = 0.0f;                       // orthogonal-ish probe
    q.row(1)[1] = 1.0f;
    q.set_normalized(true);

    TopKResult r = topk(q, ref, 1);
    CHECK(r.rows[0][0].index == 2);
    CHECK(r.rows[0][0].score == doctest::Approx(1.0f));
    CHECK(r.rows[1][0].index == 1);

    // query orthogonal to every reference scores 0
    EmbeddingMatrix ref2(2, 3);
    ref2.row(0)[0] = 1.0f;
    ref2.row(1)[1] = 1.0f;
    ref2.set_normalized(true);
    EmbeddingMatrix q2(1, 3);
    q2.row(0)[2] = 1.0f;
    q2.set_normalized(true);
    CHECK(topk(q2, ref2, 1).rows[0][0].score == doctest::Approx(0.0f));
}

TEST_CASE("ties break to the lower reference index") {
    EmbeddingMatrix ref(3, 2);
    ref.row(0)[0] = 1.0f;
    ref.row(1)[0] = 1.0f;  // duplicate of row 0
    ref.row(2)[1] = 1.0f;
    ref.set_normalized(true);
    EmbeddingMatrix q(1, 2);
    q.row(0)[0] = 1.0f;
    q.set_normalized(true);
    TopKResult r = topk(q, ref, 2);
    CHECK(r.rows[0][0].index == 0);
    CHECK(r.rows[0][1].index == 1);
}

TEST_CASE("topk validates inputs") {
    EmbeddingMatrix a = random_unit(4, 8, 1);
    EmbeddingMatrix b = random_unit(4, 16, 2);
    CHECK_THROWS_AS(topk(a, b, 1), ShapeError);
    EmbeddingMatrix c = random_unit(4, 8, 3);
    c.set_normalized(false);
    CHECK_THROWS_AS(topk(a, c, 1), PreconditionError);
    CHECK_THROWS_AS(topk(a, a, 0), PreconditionError);
    CHECK_THROWS_AS(topk(a, a, 5), PreconditionError);
}

TEST_CASE("64x16 query vs 256x16 reference matches the naive oracle") {
    EmbeddingMatrix q = random_unit(64, 16, 101);
    EmbeddingMatrix ref = random_unit(256, 16, 102);
    check_equals_oracle(topk(q, ref, 5), oracle::naive_topk(q, ref, 5));
}

TEST_CASE("property: oracle equivalence on random instances") {
    Rng rng(77);
    for (int trial = 0; trial < 25; ++trial) {
        size_t n = 1 + rng.below(40);
        size_t m = 1 + rng.below(60);
        size_t d = 1 + rng.below(24);
        size_t k = 1 + rng.below(m);
        EmbeddingMatrix q = random_unit(n, d, rng.next());
        EmbeddingMatrix ref = random_unit(m, d, rng.next());
        check_equals_oracle(topk(q, ref, k), oracle::naive_topk(q, ref, k));
    }
}

TEST_CASE("results are identical across thread counts") {
    EmbeddingMatrix q = random_unit(97, 24, 5);
    EmbeddingMatrix ref = random_unit(211, 24, 6);
    TopKResult base = topk(q, ref, 7, 1);
    for (unsigned threads : {2u, 4u, 8u}) {
        TopKResult other = topk(q, ref, 7, threads);
        for (size_t i = 0; i < base.rows.size(); ++i) {
            for (size_t j = 0; j < base.rows[i].size(); ++j) {
                CHECK(base.rows[i][j].index == other.rows[i][j].index);
                CHECK(base.rows[i][j].score == other.rows[i][j].score);
            }
        }
    }
}

TEST_CASE("top-k rows are prefixes of top-(k+1) rows") {
    EmbeddingMatrix q = random_unit(20, 12, 8);
    EmbeddingMatrix ref = random_unit(50, 12, 9);
    for (size_t k = 1; k < 8; ++k) {
        TopKResult a = topk(q, ref, k);
        TopKResult b = topk(q, ref, k + 1);
        for (size_t i = 0; i < a.rows.size(); ++i) {
            for (size_t j = 0; j < k; ++j) {
                CHECK(a.rows[i][j].index == b.rows[i][j].index);
            }
        }
    }
}

TEST_CASE("WDEM files round-trip and validate") {
    std::string path = (std::filesystem::temp_directory_path() / "knn_test.wdem").string();
    EmbeddingMatrix m = random_unit(13, 7, 42);
    write_embeddings(m, path);
    EmbeddingMatrix back = read_embeddings(path);
    CHECK(back.rows() == m.rows());
    CHECK(back.dim() == m.dim());
    CHECK(back.data() == m.data());
    CHECK(back.row_ids() == m.row_ids());

    // corrupt the magic
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOPE";
    }
    CHECK_THROWS_AS(read_embeddings(path), FormatError);
    std::filesystem::remove(path);
}
