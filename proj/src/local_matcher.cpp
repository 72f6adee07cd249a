#include "wildmatch/local_matcher.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <thread>

namespace wildmatch {

namespace {

struct NearestPair {
    double d1_sq = std::numeric_limits<double>::infinity();
    double d2_sq = std::numeric_limits<double>::infinity();
};

double distance_sq(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += diff * diff;
    }
    return acc;
}

// Two nearest reference descriptors within one image for one query descriptor.
NearestPair two_nearest(std::span<const float> q, const DescriptorSet& ref) {
    NearestPair best;
    for (size_t i = 0; i < ref.count; ++i) {
        double d = distance_sq(q, ref.descriptor(i));
        if (d < best.d1_sq) {
            best.d2_sq = best.d1_sq;
            best.d1_sq = d;
        } else if (d < best.d2_sq) {
            best.d2_sq = d;
        }
    }
    return best;
}

// d1/d2 < t  <=>  d1^2 < t^2 * d2^2 (both distances non-negative); a pair of
// exact ties (d1 == d2) is always rejected for t <= 1.
bool accepted(const NearestPair& p, double threshold) {
    return p.d1_sq < threshold * threshold * p.d2_sq;
}

void check_dims(const DescriptorSet& query, const std::vector<DescriptorSet>& refs) {
    for (const DescriptorSet& r : refs) {
        if (r.dim != query.dim) {
            throw ShapeError("descriptor width mismatch: query '" + query.image_id +
                             "' has D=" + std::to_string(query.dim) + ", reference '" +
                             r.image_id + "' has D=" + std::to_string(r.dim));
        }
    }
}

}  // namespace

void RatioTestConfig::validate() const {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw PreconditionError("ratio-test threshold must lie in (0,1]");
    }
    double previous = 0.0;
    for (double t : candidate_grid) {
        if (!(t > previous && t <= 1.0)) {
            throw PreconditionError(
                "ratio-test grid must be strictly increasing within (0,1]");
        }
        previous = t;
    }
}

CorrespondenceTally pair_correspondences(const DescriptorSet& query,
                                         const std::vector<DescriptorSet>& references,
                                         double threshold) {
    check_dims(query, references);
    CorrespondenceTally tally;
    tally.query_id = query.image_id;
    tally.counts.assign(references.size(), 0);
    for (size_t r = 0; r < references.size(); ++r) {
        const DescriptorSet& ref = references[r];
        if (ref.count < 2) continue;  // cannot supply a second neighbor
        uint32_t count = 0;
        for (size_t q = 0; q < query.count; ++q) {
            if (accepted(two_nearest(query.descriptor(q), ref), threshold)) ++count;
        }
        tally.counts[r] = count;
    }
    return tally;
}

std::vector<CorrespondenceTally> pair_correspondences_all(
    const std::vector<DescriptorSet>& queries,
    const std::vector<DescriptorSet>& references, double threshold, unsigned threads) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    std::vector<CorrespondenceTally> tallies(queries.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= queries.size()) break;
            tallies[i] = pair_correspondences(queries[i], references, threshold);
        }
    };
    if (threads == 1 || queries.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return tallies;
}

LocalPrediction predict_identity(const CorrespondenceTally& tally,
                                 const std::vector<DescriptorSet>& references,
                                 const std::vector<std::string>& identities,
                                 LocalAggregation aggregation) {
    if (references.size() != identities.size() ||
        tally.counts.size() != references.size()) {
        throw ShapeError("predict_identity: tally, references and identities must align");
    }
    if (tally.counts.empty()) {
        throw PreconditionError("predict_identity: empty tally");
    }

    LocalPrediction p;
    p.query_id = tally.query_id;

    if (aggregation == LocalAggregation::PerImage) {
        size_t best = references.size();
        for (size_t r = 0; r < references.size(); ++r) {
            if (tally.counts[r] == 0) continue;
            if (best == references.size() || tally.counts[r] > tally.counts[best] ||
                (tally.counts[r] == tally.counts[best] &&
                 references[r].image_id < references[best].image_id)) {
                best = r;
            }
        }
        if (best == references.size()) return p;  // all-zero: no-match
        p.predicted_identity = identities[best];
        p.best_reference_id = references[best].image_id;
        p.correspondences = tally.counts[best];
        p.matched = true;
        return p;
    }

    std::map<std::string, uint64_t> per_identity;
    for (size_t r = 0; r < references.size(); ++r) {
        per_identity[identities[r]] += tally.counts[r];
    }
    std::string best_identity;
    uint64_t best_sum = 0;
    for (const auto& [identity, sum] : per_identity) {  // map order = lexicographic
        if (sum > best_sum) {
            best_sum = sum;
            best_identity = identity;
        }
    }
    if (best_sum == 0) return p;
    size_t best = references.size();
    for (size_t r = 0; r < references.size(); ++r) {
        if (identities[r] != best_identity) continue;
        if (best == references.size() || tally.counts[r] > tally.counts[best] ||
            (tally.counts[r] == tally.counts[best] &&
             references[r].image_id < references[best].image_id)) {
            best = r;
        }
    }
    p.predicted_identity = best_identity;
    p.best_reference_id = references[best].image_id;
    p.correspondences = static_cast<uint32_t>(per_identity[best_identity]);
    p.matched = true;
    return p;
}

double calibrate_threshold(const std::vector<DescriptorSet>& references,
                           const std::vector<std::string>& identities,
                           const std::vector<double>& grid, unsigned threads,
                           LocalAggregation aggregation) {
    if (references.size() != identities.size()) {
        throw ShapeError("calibrate_threshold: references and identities must align");
    }
    if (grid.empty()) throw PreconditionError("calibrate_threshold: empty grid");
    std::set<std::string> distinct(identities.begin(), identities.end());
    if (distinct.size() < 2) {
        throw CalibrationError(
            "calibration needs at least two identities in the reference set");
    }

    double best_threshold = grid.front();
    double best_accuracy = -1.0;
    for (double threshold : grid) {
        size_t correct = 0;
        std::vector<CorrespondenceTally> tallies =
            pair_correspondences_all(references, references, threshold, threads);
        for (size_t i = 0; i < references.size(); ++i) {
            // leave-one-out: the held-out image cannot vote for itself
            CorrespondenceTally loo = tallies[i];
            loo.counts[i] = 0;
            LocalPrediction p =
                predict_identity(loo, references, identities, aggregation);
            if (p.matched && p.predicted_identity == identities[i]) ++correct;
        }
        double accuracy =
            static_cast<double>(correct) / static_cast<double>(references.size());
        if (accuracy > best_accuracy) {
            best_accuracy = accuracy;
            best_threshold = threshold;
        }
    }
    return best_threshold;
}

}  // namespace wildmatch
