#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "wildmatch/embedding.hpp"

namespace wildmatch {

/// Normalized reference embeddings with one identity label per row.
struct IdentityDatabase {
    EmbeddingMatrix embeddings;
    std::vector<std::string> identities;
};

struct MatchPrediction {
    std::string query_id;
    std::string predicted_identity;
    std::string best_reference_id;
    float score = 0.0f;
};

/// Throws ShapeError if labels and rows are misaligned, Error on an empty
/// label. Input embeddings are normalized if they are not already.
IdentityDatabase build_database(const EmbeddingMatrix& reference,
                                std::vector<std::string> labels);

/// 1-nearest-neighbor identity prediction under cosine similarity. vote_k > 1
/// switches to a majority vote among the top-k labels (ties go to the label
/// holding the best-scoring neighbor).
std::vector<MatchPrediction> match(const IdentityDatabase& db,
                                   const EmbeddingMatrix& query,
                                   unsigned threads = 0, size_t vote_k = 1);

/// Fraction of predictions whose identity equals the ground truth.
double evaluate(const std::vector<MatchPrediction>& predictions,
                const std::vector<std::string>& ground_truth);

/// query_id, predicted_identity, best_reference_id, score (9 significant digits)
void write_predictions(const std::vector<MatchPrediction>& predictions,
                       std::ostream& out, char delimiter = ',');

}  // namespace wildmatch
