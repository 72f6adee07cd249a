#include "wildmatch/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>

namespace wildmatch {

double cosine_annealed_lr(double base_lr, size_t epoch, size_t total_epochs) {
    double t = static_cast<double>(epoch) / static_cast<double>(total_epochs);
    return base_lr * (1.0 + std::cos(M_PI * t)) / 2.0;
}

TrainResult train_head(const EmbeddingMatrix& features,
                       const std::vector<std::string>& labels,
                       const LossConfig& loss, const TrainerConfig& config) {
    features.validate();
    if (labels.size() != features.rows()) {
        throw ShapeError("train_head: labels and feature rows are misaligned");
    }
    if (!(config.lr > 0.0)) throw PreconditionError("train_head: lr must be positive");
    if (config.epochs == 0 || config.batch_size == 0) {
        throw PreconditionError("train_head: epochs and batch size must be >= 1");
    }

    const size_t n = features.rows();
    const size_t in_dim = features.dim();
    const size_t out_dim = config.embed_dim == 0 ? in_dim : config.embed_dim;

    std::map<std::string, uint32_t> class_index;
    for (const std::string& label : labels) class_index.emplace(label, 0);
    if (class_index.size() < 2) {
        throw PreconditionError("train_head: need at least two identities");
    }
    {
        uint32_t next = 0;
        for (auto& [label, index] : class_index) index = next++;
    }
    const size_t n_classes = class_index.size();
    std::vector<uint32_t> targets(n);
    for (size_t i = 0; i < n; ++i) targets[i] = class_index.at(labels[i]);

    TrainResult result;
    result.in_dim = in_dim;
    result.out_dim = out_dim;
    for (const auto& [label, index] : class_index) result.classes.push_back(label);

    Rng rng(config.seed);
    result.projection.resize(in_dim * out_dim);
    double w_scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (double& v : result.projection) v = rng.gaussian() * w_scale;

    std::vector<double> class_weights;
    ArcFaceConfig arcface = loss.arcface;
    if (loss.kind == LossConfig::Kind::ArcFace) {
        arcface.n_classes = n_classes;
        class_weights.resize(n_classes * out_dim);
        double c_scale = 1.0 / std::sqrt(static_cast<double>(out_dim));
        for (double& v : class_weights) v = rng.gaussian() * c_scale;
    }

    std::vector<double> velocity_w(result.projection.size(), 0.0);
    std::vector<double> velocity_c(class_weights.size(), 0.0);
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    auto projection_norm = [&] {
        double acc = 0.0;
        for (double v : result.projection) acc += v * v;
        return std::sqrt(acc);
    };
    const double initial_norm = std::max(projection_norm(), 1e-12);

    double first_epoch_loss = 0.0;
    for (size_t epoch = 0; epoch < config.epochs; ++epoch) {
        double lr = cosine_annealed_lr(config.lr, epoch, config.epochs);
        rng.shuffle(order);

        double loss_sum = 0.0;
        size_t loss_count = 0;
        size_t active_sum = 0;
        for (size_t start = 0; start < n; start += config.batch_size) {
            size_t end = std::min(start + config.batch_size, n);
            size_t b = end - start;
            if (b < 2) continue;  // a trailing singleton cannot form a batch

            Batch batch;
            batch.size = b;
            batch.dim = out_dim;
            batch.embeddings.assign(b * out_dim, 0.0);
            batch.labels.resize(b);
            for (size_t i = 0; i < b; ++i) {
                size_t row = order[start + i];
                batch.labels[i] = targets[row];
                auto x = features.row(row);
                for (size_t o = 0; o < out_dim; ++o) {
                    double acc = 0.0;
                    for (size_t k = 0; k < in_dim; ++k) {
                        acc += static_cast<double>(x[k]) *
                               result.projection[k * out_dim + o];
                    }
                    batch.embeddings[i * out_dim + o] = acc;
                }
            }

            std::vector<double> grad_z;  // B x out_dim
            double batch_loss = 0.0;
            if (loss.kind == LossConfig::Kind::ArcFace) {
                ArcFaceResult r = arcface_loss(batch, class_weights, arcface);
                batch_loss = r.loss;
                grad_z = std::move(r.grad_embeddings);
                active_sum += b;
                for (size_t j = 0; j < class_weights.size(); ++j) {
                    velocity_c[j] = config.momentum * velocity_c[j] - lr * r.grad_weights[j];
                    class_weights[j] += velocity_c[j];
                }
            } else {
                TripletResult r = triplet_loss(batch, loss.triplet);
                batch_loss = r.loss;
                grad_z = std::move(r.grad_embeddings);
                active_sum += r.n_active;
            }

            // grad_W = X^T dZ
            std::vector<double> grad_w(result.projection.size(), 0.0);
            for (size_t i = 0; i < b; ++i) {
                size_t row = order[start + i];
                auto x = features.row(row);
                const double* gz = grad_z.data() + i * out_dim;
                for (size_t k = 0; k < in_dim; ++k) {
                    double xv = static_cast<double>(x[k]);
                    double* gw = grad_w.data() + k * out_dim;
                    for (size_t o = 0; o < out_dim; ++o) gw[o] += xv * gz[o];
                }
            }
            for (size_t j = 0; j < result.projection.size(); ++j) {
                velocity_w[j] = config.momentum * velocity_w[j] - lr * grad_w[j];
                result.projection[j] += velocity_w[j];
            }

            loss_sum += batch_loss;
            ++loss_count;
        }

        double mean_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count)
                                          : 0.0;
        result.trace.push_back({epoch, lr, mean_loss, active_sum});
        if (epoch == 0) first_epoch_loss = mean_loss;

        bool blown_up = !std::isfinite(mean_loss) ||
                        (first_epoch_loss > 0.0 &&
                         mean_loss > config.divergence_factor * first_epoch_loss) ||
                        !(projection_norm() <=
                          config.weight_blowup_factor * initial_norm);
        if (blown_up) {
            result.diverged = true;
            result.diverged_epoch = epoch;
            break;
        }
    }
    return result;
}

EmbeddingMatrix project(const EmbeddingMatrix& features, const TrainResult& head) {
    if (features.dim() != head.in_dim) {
        throw ShapeError("project: feature dim " + std::to_string(features.dim()) +
                         " != head input dim " + std::to_string(head.in_dim));
    }
    EmbeddingMatrix out(features.rows(), head.out_dim);
    out.row_ids() = features.row_ids();
    for (size_t i = 0; i < features.rows(); ++i) {
        auto x = features.row(i);
        auto z = out.row(i);
        for (size_t o = 0; o < head.out_dim; ++o) {
            double acc = 0.0;
            for (size_t k = 0; k < head.in_dim; ++k) {
                acc += static_cast<double>(x[k]) * head.projection[k * head.out_dim + o];
            }
            z[o] = static_cast<float>(acc);
        }
    }
    return out;
}

void write_trace(const std::vector<EpochStat>& trace, std::ostream& out,
                 char delimiter) {
    out << "epoch" << delimiter << "lr" << delimiter << "mean_loss" << delimiter
        << "n_active" << '\n';
    for (const EpochStat& e : trace) {
        char lr[32], loss[32];
        std::snprintf(lr, sizeof(lr), "%.9g", e.lr);
        std::snprintf(loss, sizeof(loss), "%.9g", e.mean_loss);
        out << e.epoch << delimiter << lr << delimiter << loss << delimiter
            << e.n_active << '\n';
    }
}

}  // namespace wildmatch
