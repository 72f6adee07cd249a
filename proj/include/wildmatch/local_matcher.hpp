#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wildmatch/descriptors.hpp"

namespace wildmatch {

struct RatioTestConfig {
    double threshold = 0.8;
    /// Calibration grid; strictly increasing, each value in (0,1].
    std::vector<double> candidate_grid = {0.5,  0.55, 0.6,  0.65, 0.7,
                                          0.75, 0.8,  0.85, 0.9,  0.95};

    void validate() const;
};

/// Accepted-correspondence counts for one query image, aligned with the
/// reference collection order.
struct CorrespondenceTally {
    std::string query_id;
    std::vector<uint32_t> counts;
};

/// How tallies are turned into an identity: the single best reference image
/// decides, or counts are summed per identity first.
enum class LocalAggregation { PerImage, PerIdentitySum };

struct LocalPrediction {
    std::string query_id;
    std::string predicted_identity;  // empty iff !matched
    std::string best_reference_id;   // empty iff !matched
    uint32_t correspondences = 0;
    bool matched = false;
};

/// Ratio-test matching of one query image against every reference image.
/// For each query descriptor the two nearest descriptors *within* a
/// reference image give d1 <= d2; the match counts iff d1/d2 < threshold.
/// Reference images with fewer than two descriptors always score 0.
CorrespondenceTally pair_correspondences(const DescriptorSet& query,
                                         const std::vector<DescriptorSet>& references,
                                         double threshold);

std::vector<CorrespondenceTally> pair_correspondences_all(
    const std::vector<DescriptorSet>& queries,
    const std::vector<DescriptorSet>& references, double threshold,
    unsigned threads = 0);

/// Leave-one-out calibration over the reference images: returns the grid
/// threshold maximizing LOO identification accuracy, smallest on ties.
/// Throws CalibrationError when the reference holds fewer than 2 identities.
double calibrate_threshold(const std::vector<DescriptorSet>& references,
                           const std::vector<std::string>& identities,
                           const std::vector<double>& grid, unsigned threads = 0,
                           LocalAggregation aggregation = LocalAggregation::PerImage);

/// Identity with the maximal correspondence count; ties break to the
/// lexicographically smallest reference image_id (or identity for the
/// per-identity mode). All-zero tallies yield an unmatched prediction.
LocalPrediction predict_identity(const CorrespondenceTally& tally,
                                 const std::vector<DescriptorSet>& references,
                                 const std::vector<std::string>& identities,
                                 LocalAggregation aggregation = LocalAggregation::PerImage);

}  // namespace wildmatch
