#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wildmatch/common.hpp"

namespace wildmatch {

struct ArcFaceConfig {
    double margin = 0.5;  // radians, in [0, pi)
    double scale = 64.0;  // hypersphere radius, > 0
    size_t n_classes = 0;

    void validate() const;
};

enum class Mining : uint8_t {
    All,       // every valid (a,p,n)
    Semi,      // d(a,n) > d(a,p)
    SemiBand,  // conventional band: d(a,p) < d(a,n) < d(a,p) + margin
    Hard,      // d(a,n) < d(a,p)
};

Mining mining_from_string(const std::string& text);
std::string mining_to_string(Mining mining);

struct TripletConfig {
    double margin = 0.2;  // > 0
    Mining mining = Mining::All;

    void validate() const;
};

/// Mini-batch of raw (unnormalized) embeddings with class labels.
struct Batch {
    size_t size = 0;  // B >= 2
    size_t dim = 0;
    std::vector<double> embeddings;  // B x D row-major
    std::vector<uint32_t> labels;    // class indices

    void validate(size_t n_classes = 0) const;
};

struct ArcFaceResult {
    double loss = 0.0;
    std::vector<double> grad_embeddings;  // B x D
    std::vector<double> grad_weights;     // C x D
};

/// Additive-angular-margin softmax over cosine logits. Embeddings and class
/// weight rows are L2-normalized internally; the gradients are with respect
/// to the raw inputs (normalization Jacobian included). The target angle is
/// clamped to [0, pi - margin]. margin = 0, scale = 1 reduces to plain
/// softmax cross-entropy over cosine logits.
ArcFaceResult arcface_loss(const Batch& batch, const std::vector<double>& class_weights,
                           const ArcFaceConfig& config);

struct Triplet {
    size_t anchor, positive, negative;
};

/// Triplets selected by the mining rule, in lexicographic (a,p,n) order.
/// Distances are Euclidean on L2-normalized embeddings.
std::vector<Triplet> mine_triplets(const Batch& batch, Mining mining,
                                   double margin = 0.0);

struct TripletResult {
    double loss = 0.0;
    std::vector<double> grad_embeddings;  // B x D
    size_t n_active = 0;                  // triplets with a non-zero hinge term
};

/// Mean hinge loss max(0, d(a,p) - d(a,n) + margin) over the mined triplets.
/// An empty selection yields loss 0 with zero gradients.
TripletResult triplet_loss(const Batch& batch, const TripletConfig& config);

}  // namespace wildmatch
