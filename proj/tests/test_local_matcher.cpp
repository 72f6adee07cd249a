#include <doctest.h>

#include "oracles.hpp"
#include "wildmatch/local_matcher.hpp"
#include "wildmatch/simgen.hpp"

using namespace wildmatch;

namespace {

DescriptorSet make_set(std::string id, size_t dim,
                       const std::vector<std::vector<float>>& descriptors) {
    DescriptorSet s;
    s.image_id = std::move(id);
    s.dim = dim;
    s.count = descriptors.size();
    for (const auto& d : descriptors) {
        s.data.insert(s.data.end(), d.begin(), d.end());
    }
    return s;
}

std::vector<DescriptorSet> random_sets(size_t n_images, size_t dim, Rng& rng) {
    std::vector<DescriptorSet> sets;
    for (size_t i = 0; i < n_images; ++i) {
        DescriptorSet s;
        s.image_id = "img" + std::to_string(i);
        s.dim = dim;
        s.count = rng.below(20);
        s.data.resize(s.count * dim);
        for (float& v : s.data) v = static_cast<float>(rng.gaussian() * 3.0);
        sets.push_back(std::move(s));
    }
    return sets;
}

}  // namespace

TEST_CASE("ratio test accepts d1/d2 below the threshold") {
    // query descriptor at origin; reference descriptors at distances 0.4 and 1.0
    DescriptorSet query = make_set("q", 2, {{0.0f, 0.0f}});
    DescriptorSet ref = make_set("r", 2, {{0.4f, 0.0f}, {1.0f, 0.0f}});
    CorrespondenceTally t = pair_correspondences(query, {ref}, 0.8);
    CHECK(t.counts[0] == 1);

    // d1 == d2 is rejected at any threshold <= 1
    DescriptorSet tie = make_set("r2", 2, {{0.5f, 0.0f}, {-0.5f, 0.0f}});
    CHECK(pair_correspondences(query, {tie}, 1.0).counts[0] == 0);
    CHECK(pair_correspondences(query, {tie}, 0.5).counts[0] == 0);
}

TEST_CASE("reference images with fewer than two descriptors score zero") {
    DescriptorSet query = make_set("q", 2, {{0.0f, 0.0f}});
    DescriptorSet lone = make_set("r", 2, {{0.0f, 0.0f}});
    CHECK(pair_correspondences(query, {lone}, 0.9).counts[0] == 0);
}

TEST_CASE("identical well-separated sets tally every descriptor") {
    Rng rng(7);
    std::vector<std::vector<float>> descriptors;
    for (int i = 0; i < 10; ++i) {
        descriptors.push_back({static_cast<float>(i * 10), static_cast<float>(i % 3)});
    }
    DescriptorSet a = make_set("a", 2, descriptors);
    DescriptorSet b = make_set("b", 2, descriptors);
    CorrespondenceTally t = pair_correspondences(a, {b}, 0.8);
    CHECK(t.counts[0] == 10);
    CHECK(t.counts[0] == oracle::naive_tally(a, {b}, 0.8)[0]);
}

TEST_CASE("property: tallies equal the brute-force oracle") {
    Rng rng(55);
    for (int trial = 0; trial < 30; ++trial) {
        size_t dim = 1 + rng.below(8);
        std::vector<DescriptorSet> refs = random_sets(1 + rng.below(5), dim, rng);
        std::vector<DescriptorSet> queries = random_sets(1 + rng.below(3), dim, rng);
        double threshold = 0.3 + 0.65 * rng.uniform();
        for (const auto& q : queries) {
            CorrespondenceTally t = pair_correspondences(q, refs, threshold);
            CHECK(t.counts == oracle::naive_tally(q, refs, threshold));
        }
    }
}

TEST_CASE("property: raising the threshold never lowers a count") {
    Rng rng(56);
    std::vector<DescriptorSet> refs = random_sets(4, 4, rng);
    std::vector<DescriptorSet> queries = random_sets(2, 4, rng);
    for (const auto& q : queries) {
        std::vector<uint32_t> previous;
        for (double t : {0.4, 0.6, 0.8, 0.95}) {
            std::vector<uint32_t> counts = pair_correspondences(q, refs, t).counts;
            if (!previous.empty()) {
                for (size_t i = 0; i < counts.size(); ++i) {
                    CHECK(counts[i] >= previous[i]);
                }
            }
            previous = counts;
        }
    }
}

TEST_CASE("descriptor order within a set does not matter") {
    Rng rng(57);
    std::vector<DescriptorSet> refs = random_sets(3, 4, rng);
    DescriptorSet q = random_sets(1, 4, rng)[0];
    CorrespondenceTally base = pair_correspondences(q, refs, 0.8);

    // reverse descriptor order in every reference set
    for (DescriptorSet& s : refs) {
        std::vector<float> reversed;
        for (size_t i = s.count; i > 0; --i) {
            auto d = s.descriptor(i - 1);
            reversed.insert(reversed.end(), d.begin(), d.end());
        }
        s.data = std::move(reversed);
    }
    CHECK(pair_correspondences(q, refs, 0.8).counts == base.counts);
}

TEST_CASE("predict_identity picks the max-count image, ties lexicographic") {
    std::vector<DescriptorSet> refs;
    refs.push_back(make_set("ref1", 2, {{0, 0}, {1, 1}}));
    refs.push_back(make_set("ref2", 2, {{0, 0}, {1, 1}}));
    std::vector<std::string> identities = {"A", "B"};

    CorrespondenceTally t;
    t.query_id = "q";
    t.counts = {7, 3};
    LocalPrediction p = predict_identity(t, refs, identities);
    CHECK(p.predicted_identity == "A");
    CHECK(p.best_reference_id == "ref1");

    t.counts = {5, 5};
    CHECK(predict_identity(t, refs, identities).predicted_identity == "A");

    t.counts = {0, 0};
    LocalPrediction none = predict_identity(t, refs, identities);
    CHECK_FALSE(none.matched);
}

TEST_CASE("per-identity aggregation sums counts") {
    std::vector<DescriptorSet> refs;
    refs.push_back(make_set("r0", 2, {{0, 0}, {1, 1}}));
    refs.push_back(make_set("r1", 2, {{0, 0}, {1, 1}}));
    refs.push_back(make_set("r2", 2, {{0, 0}, {1, 1}}));
    std::vector<std::string> identities = {"A", "B", "B"};
    CorrespondenceTally t;
    t.query_id = "q";
    t.counts = {4, 3, 3};  // A: 4 as an image, B: 6 summed
    CHECK(predict_identity(t, refs, identities).predicted_identity == "A");
    CHECK(predict_identity(t, refs, identities, LocalAggregation::PerIdentitySum)
              .predicted_identity == "B");
}

TEST_CASE("calibration returns the best grid threshold, smallest on ties") {
    SimSpec spec;
    spec.n_identities = 4;
    spec.images_per_identity = 4;
    spec.dim = 8;
    spec.concentration = 25.0;
    spec.seed = 5;
    auto [catalog, sets] = gen_descriptors(spec, 6);
    std::vector<std::string> identities;
    for (const auto& s : sets) identities.push_back(catalog.at(s.image_id).identity);

    std::vector<double> grid = {0.5, 0.7, 0.9};
    double chosen = calibrate_threshold(sets, identities, grid);
    CHECK((chosen == 0.5 || chosen == 0.7 || chosen == 0.9));

    // exhaustive re-evaluation: chosen threshold is optimal and the smallest
    // among the optima
    auto loo_accuracy = [&](double threshold) {
        size_t correct = 0;
        for (size_t i = 0; i < sets.size(); ++i) {
            CorrespondenceTally t = pair_correspondences(sets[i], sets, threshold);
            t.counts[i] = 0;
            LocalPrediction p = predict_identity(t, sets, identities);
            if (p.matched && p.predicted_identity == identities[i]) ++correct;
        }
        return static_cast<double>(correct) / static_cast<double>(sets.size());
    };
    double best = loo_accuracy(chosen);
    for (double t : grid) {
        CHECK(loo_accuracy(t) <= best + 1e-12);
        if (t < chosen) CHECK(loo_accuracy(t) < best);
    }
}

TEST_CASE("calibration needs two identities") {
    SimSpec spec;
    spec.n_identities = 1;
    spec.images_per_identity = 3;
    spec.dim = 4;
    spec.seed = 1;
    auto [catalog, sets] = gen_descriptors(spec, 4);
    std::vector<std::string> identities(sets.size(), "only");
    CHECK_THROWS_AS(calibrate_threshold(sets, identities, {0.8}), CalibrationError);
}

TEST_CASE("dimension mismatch is a shape error") {
    DescriptorSet q = make_set("q", 2, {{0, 0}});
    DescriptorSet r = make_set("r", 3, {{0, 0, 0}, {1, 1, 1}});
    CHECK_THROWS_AS(pair_correspondences(q, {r}, 0.8), ShapeError);
}
