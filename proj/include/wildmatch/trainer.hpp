#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "wildmatch/embedding.hpp"
#include "wildmatch/losses.hpp"

namespace wildmatch {

struct LossConfig {
    enum class Kind { ArcFace, Triplet };
    Kind kind = Kind::ArcFace;
    ArcFaceConfig arcface;  // n_classes is filled in by the trainer
    TripletConfig triplet;
};

struct TrainerConfig {
    double lr = 0.001;
    double momentum = 0.9;
    size_t epochs = 100;
    size_t batch_size = 128;
    size_t embed_dim = 0;  // 0: same as the feature dim
    uint64_t seed = 0;
    /// Divergence: NaN epoch loss, or epoch loss above this multiple of the
    /// first epoch's loss.
    double divergence_factor = 10.0;
    /// The losses are scale invariant, so a run can also blow up silently in
    /// the parameters; a projection norm above this multiple of its initial
    /// value is flagged as divergence too.
    double weight_blowup_factor = 1e3;
};

struct EpochStat {
    size_t epoch = 0;
    double lr = 0.0;
    double mean_loss = 0.0;
    size_t n_active = 0;  // active triplets; batch count for ArcFace
};

struct TrainResult {
    std::vector<double> projection;  // in_dim x out_dim, row-major
    size_t in_dim = 0;
    size_t out_dim = 0;
    std::vector<std::string> classes;  // sorted unique labels
    std::vector<EpochStat> trace;
    bool diverged = false;
    size_t diverged_epoch = 0;  // valid iff diverged
};

/// Cosine-annealed learning rate: lr * (1 + cos(pi * epoch / total)) / 2.
double cosine_annealed_lr(double base_lr, size_t epoch, size_t total_epochs);

/// Trains a linear projection head over precomputed features with SGD
/// momentum and cosine annealing. Deterministic for a fixed seed. Divergence
/// is reported in the result, never thrown.
TrainResult train_head(const EmbeddingMatrix& features,
                       const std::vector<std::string>& labels,
                       const LossConfig& loss, const TrainerConfig& config);

/// Applies a trained projection to a feature matrix.
EmbeddingMatrix project(const EmbeddingMatrix& features, const TrainResult& head);

/// epoch, lr, mean loss, n_active as delimiter-separated text.
void write_trace(const std::vector<EpochStat>& trace, std::ostream& out,
                 char delimiter = ',');

}  // namespace wildmatch
