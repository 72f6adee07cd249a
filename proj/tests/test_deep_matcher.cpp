#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "wildmatch/deep_matcher.hpp"
#include "wildmatch/simgen.hpp"

using namespace wildmatch;

namespace {

EmbeddingMatrix basis(size_t n, size_t d) {
    EmbeddingMatrix m(n, d);
    for (size_t i = 0; i < n; ++i) {
        m.row(i)[i % d] = 1.0f;
        m.row_ids()[i] = "ref" + std::to_string(i);
    }
    m.set_normalized(true);
    return m;
}

}  // namespace

TEST_CASE("build_database checks alignment and normalizes") {
    EmbeddingMatrix m(3, 2);
    for (size_t i = 0; i < 3; ++i) {
        m.row(i)[0] = 3.0f;
        m.row(i)[1] = 4.0f;
        m.row_ids()[i] = "r" + std::to_string(i);
    }
    CHECK_THROWS_AS(build_database(m, {"a", "b"}), ShapeError);
    IdentityDatabase db = build_database(m, {"a", "b", "c"});
    CHECK(db.embeddings.normalized());
    for (size_t i = 0; i < 3; ++i) {
        double norm = 0.0;
        for (float v : db.embeddings.row(i)) norm += static_cast<double>(v) * v;
        CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-5));
    }
}

TEST_CASE("match returns the exact reference's identity at score 1") {
    EmbeddingMatrix ref = basis(3, 3);
    IdentityDatabase db = build_database(ref, {"turtle-7", "turtle-8", "turtle-9"});
    EmbeddingMatrix q(1, 3);
    q.row(0)[1] = 1.0f;
    q.row_ids()[0] = "probe";
    q.set_normalized(true);
    auto predictions = match(db, q);
    REQUIRE(predictions.size() == 1);
    CHECK(predictions[0].predicted_identity == "turtle-8");
    CHECK(predictions[0].best_reference_id == "ref1");
    CHECK(predictions[0].score == doctest::Approx(1.0f));
}

TEST_CASE("equidistant references resolve to the lower index") {
    EmbeddingMatrix ref(2, 2);
    ref.row(0)[0] = 1.0f;
    ref.row(1)[0] = 1.0f;
    ref.row_ids() = {"r0", "r1"};
    ref.set_normalized(true);
    IdentityDatabase db = build_database(ref, {"A", "B"});
    EmbeddingMatrix q(1, 2);
    q.row(0)[0] = 1.0f;
    q.row_ids()[0] = "x";
    q.set_normalized(true);
    CHECK(match(db, q)[0].predicted_identity == "A");
}

TEST_CASE("match is invariant to positive query scaling") {
    SimSpec spec;
    spec.n_identities = 6;
    spec.images_per_identity = 4;
    spec.dim = 16;
    spec.seed = 31;
    auto [catalog, m] = gen_embeddings(spec);
    std::vector<std::string> labels;
    for (const auto& r : catalog.records()) labels.push_back(r.identity);
    IdentityDatabase db = build_database(m, labels);

    EmbeddingMatrix q = m;
    q.set_normalized(false);
    for (size_t i = 0; i < q.rows(); ++i) {
        float scale = 0.5f + static_cast<float>(i % 7);
        for (float& v : q.row(i)) v *= scale;
    }
    auto a = match(db, m);
    auto b = match(db, q);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].predicted_identity == b[i].predicted_identity);
        CHECK(a[i].best_reference_id == b[i].best_reference_id);
    }
}

TEST_CASE("tightly clustered synthetic identities match perfectly") {
    SimSpec spec;
    spec.n_identities = 20;
    spec.images_per_identity = 7;
    spec.dim = 32;
    spec.concentration = 400.0;
    spec.seed = 12;
    auto [catalog, m] = gen_embeddings(spec);

    // 5 reference + 2 query per identity
    std::vector<std::string> ref_labels, query_labels;
    std::vector<size_t> ref_rows, query_rows;
    for (size_t i = 0; i < m.rows(); ++i) {
        if (i % 7 < 5) {
            ref_rows.push_back(i);
            ref_labels.push_back(catalog.records()[i].identity);
        } else {
            query_rows.push_back(i);
            query_labels.push_back(catalog.records()[i].identity);
        }
    }
    auto take = [&](const std::vector<size_t>& rows) {
        EmbeddingMatrix sub(rows.size(), m.dim());
        for (size_t i = 0; i < rows.size(); ++i) {
            auto src = m.row(rows[i]);
            std::copy(src.begin(), src.end(), sub.row(i).begin());
            sub.row_ids()[i] = m.row_ids()[rows[i]];
        }
        sub.set_normalized(true);
        return sub;
    };
    IdentityDatabase db = build_database(take(ref_rows), ref_labels);
    auto predictions = match(db, take(query_rows));
    CHECK(evaluate(predictions, query_labels) == 1.0);
}

TEST_CASE("evaluate counts exact identity agreement") {
    std::vector<MatchPrediction> p(3);
    p[0].predicted_identity = "a";
    p[1].predicted_identity = "b";
    p[2].predicted_identity = "c";
    CHECK(evaluate(p, {"a", "b", "x"}) == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
    CHECK(evaluate(p, {"a", "b", "c"}) == 1.0);
    CHECK(evaluate(p, {"x", "y", "z"}) == 0.0);
    CHECK_THROWS_AS(evaluate({}, {}), PreconditionError);
}

TEST_CASE("predictions emit with 9 significant digits") {
    std::vector<MatchPrediction> p(1);
    p[0] = {"q1", "lion-3", "ref9", 0.123456789f};
    std::ostringstream out;
    write_predictions(p, out);
    CHECK(out.str().find("q1,lion-3,ref9,0.123456") != std::string::npos);
}
