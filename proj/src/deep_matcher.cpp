#include "wildmatch/deep_matcher.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>

namespace wildmatch {

IdentityDatabase build_database(const EmbeddingMatrix& reference,
                                std::vector<std::string> labels) {
    if (labels.size() != reference.rows()) {
        throw ShapeError("build_database: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(reference.rows()) + " rows");
    }
    for (const std::string& label : labels) {
        if (label.empty()) throw Error("build_database: empty identity label");
    }
    IdentityDatabase db;
    db.embeddings = reference.normalized() ? reference : normalize(reference);
    db.identities = std::move(labels);
    return db;
}

std::vector<MatchPrediction> match(const IdentityDatabase& db,
                                   const EmbeddingMatrix& query, unsigned threads,
                                   size_t vote_k) {
    if (vote_k < 1) throw PreconditionError("match: vote_k must be >= 1");
    vote_k = std::min(vote_k, db.embeddings.rows());
    EmbeddingMatrix q = query.normalized() ? query : normalize(query);
    TopKResult top = topk(q, db.embeddings, vote_k, threads);

    std::vector<MatchPrediction> predictions;
    predictions.reserve(q.rows());
    for (size_t i = 0; i < q.rows(); ++i) {
        const std::vector<Neighbor>& neighbors = top.rows[i];
        const Neighbor* winner = &neighbors.front();
        if (vote_k > 1) {
            std::map<std::string, size_t> votes;
            for (const Neighbor& n : neighbors) ++votes[db.identities[n.index]];
            size_t best_votes = 0;
            for (const auto& [label, count] : votes) best_votes = std::max(best_votes, count);
            // neighbors are score-ordered, so the first row of the winning
            // label is its best-scoring representative
            for (const Neighbor& n : neighbors) {
                if (votes[db.identities[n.index]] == best_votes) {
                    winner = &n;
                    break;
                }
            }
        }
        MatchPrediction p;
        p.query_id = q.row_ids()[i];
        p.predicted_identity = db.identities[winner->index];
        p.best_reference_id = db.embeddings.row_ids()[winner->index];
        p.score = winner->score;
        predictions.push_back(std::move(p));
    }
    return predictions;
}

double evaluate(const std::vector<MatchPrediction>& predictions,
                const std::vector<std::string>& ground_truth) {
    if (predictions.empty()) throw PreconditionError("evaluate: no predictions");
    if (predictions.size() != ground_truth.size()) {
        throw ShapeError("evaluate: " + std::to_string(predictions.size()) +
                         " predictions vs " + std::to_string(ground_truth.size()) +
                         " labels");
    }
    size_t correct = 0;
    for (size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i].predicted_identity == ground_truth[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

void write_predictions(const std::vector<MatchPrediction>& predictions,
                       std::ostream& out, char delimiter) {
    out << "query_id" << delimiter << "predicted_identity" << delimiter
        << "best_reference_id" << delimiter << "score" << '\n';
    for (const MatchPrediction& p : predictions) {
        char score[32];
        std::snprintf(score, sizeof(score), "%.9g", static_cast<double>(p.score));
        out << p.query_id << delimiter << p.predicted_identity << delimiter
            << p.best_reference_id << delimiter << score << '\n';
    }
}

}  // namespace wildmatch
