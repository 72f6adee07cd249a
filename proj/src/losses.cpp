#include "wildmatch/losses.hpp"

#include <algorithm>
#include <cmath>

namespace wildmatch {

namespace {

constexpr double kMinSinTheta = 1e-8;

struct Normalized {
    std::vector<double> unit;   // B x D
    std::vector<double> norms;  // B
};

Normalized normalize_rows(const std::vector<double>& data, size_t n, size_t d,
                          const char* what) {
    Normalized out;
    out.unit.resize(n * d);
    out.norms.resize(n);
    for (size_t i = 0; i < n; ++i) {
        double norm_sq = 0.0;
        for (size_t j = 0; j < d; ++j) norm_sq += data[i * d + j] * data[i * d + j];
        double norm = std::sqrt(norm_sq);
        if (norm == 0.0) {
            throw PreconditionError(std::string(what) + " row " + std::to_string(i) +
                                    " has zero norm");
        }
        out.norms[i] = norm;
        for (size_t j = 0; j < d; ++j) out.unit[i * d + j] = data[i * d + j] / norm;
    }
    return out;
}

// B x B Euclidean distances between normalized rows.
std::vector<double> pairwise_distances(const std::vector<double>& unit, size_t b,
                                       size_t d) {
    std::vector<double> dist(b * b, 0.0);
    for (size_t i = 0; i < b; ++i) {
        for (size_t j = i + 1; j < b; ++j) {
            double acc = 0.0;
            for (size_t k = 0; k < d; ++k) {
                double diff = unit[i * d + k] - unit[j * d + k];
                acc += diff * diff;
            }
            double value = std::sqrt(acc);
            dist[i * b + j] = value;
            dist[j * b + i] = value;
        }
    }
    return dist;
}

}  // namespace

void ArcFaceConfig::validate() const {
    if (!(margin >= 0.0 && margin < M_PI)) {
        throw PreconditionError("arcface margin must lie in [0, pi)");
    }
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw PreconditionError("arcface scale must be a finite positive value");
    }
}

void TripletConfig::validate() const {
    if (!(margin > 0.0) || !std::isfinite(margin)) {
        throw PreconditionError("triplet margin must be a finite positive value");
    }
}

void Batch::validate(size_t n_classes) const {
    if (size < 2) throw PreconditionError("batch must contain at least 2 samples");
    if (dim == 0 || embeddings.size() != size * dim || labels.size() != size) {
        throw ShapeError("batch embeddings/labels are misaligned");
    }
    if (n_classes > 0) {
        for (size_t i = 0; i < size; ++i) {
            if (labels[i] >= n_classes) {
                throw Error("label " + std::to_string(labels[i]) + " at position " +
                            std::to_string(i) + " is out of range for " +
                            std::to_string(n_classes) + " classes");
            }
        }
    }
}

Mining mining_from_string(const std::string& text) {
    if (text == "all") return Mining::All;
    if (text == "semi") return Mining::Semi;
    if (text == "semi-band") return Mining::SemiBand;
    if (text == "hard") return Mining::Hard;
    throw FormatError("unknown mining strategy '" + text + "'");
}

std::string mining_to_string(Mining mining) {
    switch (mining) {
        case Mining::All: return "all";
        case Mining::Semi: return "semi";
        case Mining::SemiBand: return "semi-band";
        case Mining::Hard: return "hard";
    }
    throw Error("unreachable mining value");
}

ArcFaceResult arcface_loss(const Batch& batch, const std::vector<double>& class_weights,
                           const ArcFaceConfig& config) {
    config.validate();
    if (config.n_classes == 0 ||
        class_weights.size() != config.n_classes * batch.dim) {
        throw ShapeError("class_weights must be n_classes x batch dim");
    }
    batch.validate(config.n_classes);

    const size_t b = batch.size;
    const size_t d = batch.dim;
    const size_t c = config.n_classes;
    const double s = config.scale;
    const double m = config.margin;

    Normalized e = normalize_rows(batch.embeddings, b, d, "embedding");
    Normalized w = normalize_rows(class_weights, c, d, "class weight");

    ArcFaceResult result;
    result.grad_embeddings.assign(b * d, 0.0);
    result.grad_weights.assign(c * d, 0.0);

    std::vector<double> cosines(c), logits(c), probs(c);
    for (size_t i = 0; i < b; ++i) {
        const double* u = e.unit.data() + i * d;
        const uint32_t y = batch.labels[i];

        for (size_t j = 0; j < c; ++j) {
            double acc = 0.0;
            const double* v = w.unit.data() + j * d;
            for (size_t k = 0; k < d; ++k) acc += u[k] * v[k];
            cosines[j] = std::clamp(acc, -1.0, 1.0);
            logits[j] = s * cosines[j];
        }

        // additive angular margin on the target class, theta clamped so
        // theta + m stays within [m, pi]
        double theta = std::acos(cosines[y]);
        bool clamped = theta > M_PI - m;
        double theta_c = clamped ? M_PI - m : theta;
        logits[y] = s * std::cos(theta_c + m);

        double max_logit = *std::max_element(logits.begin(), logits.end());
        double denom = 0.0;
        for (size_t j = 0; j < c; ++j) {
            probs[j] = std::exp(logits[j] - max_logit);
            denom += probs[j];
        }
        for (size_t j = 0; j < c; ++j) probs[j] /= denom;
        result.loss += -(logits[y] - max_logit - std::log(denom));

        for (size_t j = 0; j < c; ++j) {
            double dl_dlogit = (probs[j] - (j == y ? 1.0 : 0.0)) / static_cast<double>(b);
            double dlogit_dcos;
            if (j != y) {
                dlogit_dcos = s;
            } else if (clamped) {
                dlogit_dcos = 0.0;  // target logit pinned at s*cos(pi)
            } else {
                double sin_theta = std::max(std::sin(theta), kMinSinTheta);
                dlogit_dcos = s * std::sin(theta + m) / sin_theta;
            }
            double g = dl_dlogit * dlogit_dcos;
            if (g == 0.0) continue;
            const double* v = w.unit.data() + j * d;
            double* ge = result.grad_embeddings.data() + i * d;
            double* gw = result.grad_weights.data() + j * d;
            for (size_t k = 0; k < d; ++k) {
                ge[k] += g * (v[k] - cosines[j] * u[k]) / e.norms[i];
                gw[k] += g * (u[k] - cosines[j] * v[k]) / w.norms[j];
            }
        }
    }
    result.loss /= static_cast<double>(b);
    return result;
}

std::vector<Triplet> mine_triplets(const Batch& batch, Mining mining, double margin) {
    batch.validate();
    const size_t b = batch.size;
    Normalized e = normalize_rows(batch.embeddings, b, batch.dim, "embedding");
    std::vector<double> dist = pairwise_distances(e.unit, b, batch.dim);

    std::vector<Triplet> selected;
    for (size_t a = 0; a < b; ++a) {
        for (size_t p = 0; p < b; ++p) {
            if (p == a || batch.labels[p] != batch.labels[a]) continue;
            for (size_t n = 0; n < b; ++n) {
                if (batch.labels[n] == batch.labels[a]) continue;
                double d_ap = dist[a * b + p];
                double d_an = dist[a * b + n];
                bool keep = false;
                switch (mining) {
                    case Mining::All: keep = true; break;
                    case Mining::Semi: keep = d_an > d_ap; break;
                    case Mining::SemiBand:
                        keep = d_an > d_ap && d_an < d_ap + margin;
                        break;
                    case Mining::Hard: keep = d_an < d_ap; break;
                }
                if (keep) selected.push_back({a, p, n});
            }
        }
    }
    return selected;
}

TripletResult triplet_loss(const Batch& batch, const TripletConfig& config) {
    config.validate();
    batch.validate();
    const size_t b = batch.size;
    const size_t d = batch.dim;

    Normalized e = normalize_rows(batch.embeddings, b, d, "embedding");
    std::vector<double> dist = pairwise_distances(e.unit, b, d);
    std::vector<Triplet> selected = mine_triplets(batch, config.mining, config.margin);

    TripletResult result;
    result.grad_embeddings.assign(b * d, 0.0);
    if (selected.empty()) return result;

    std::vector<double> grad_unit(b * d, 0.0);
    const double weight = 1.0 / static_cast<double>(selected.size());
    for (const Triplet& t : selected) {
        double d_ap = dist[t.anchor * b + t.positive];
        double d_an = dist[t.anchor * b + t.negative];
        double term = d_ap - d_an + config.margin;
        if (term <= 0.0) continue;
        result.loss += weight * term;
        ++result.n_active;
        if (d_ap == 0.0 || d_an == 0.0) continue;  // coincident points: subgradient 0
        const double* ua = e.unit.data() + t.anchor * d;
        const double* up = e.unit.data() + t.positive * d;
        const double* un = e.unit.data() + t.negative * d;
        for (size_t k = 0; k < d; ++k) {
            double g_ap = (ua[k] - up[k]) / d_ap;
            double g_an = (ua[k] - un[k]) / d_an;
            grad_unit[t.anchor * d + k] += weight * (g_ap - g_an);
            grad_unit[t.positive * d + k] -= weight * g_ap;
            grad_unit[t.negative * d + k] += weight * g_an;
        }
    }

    // pull back through the normalization: de = (g - (g.u) u) / ||e||
    for (size_t i = 0; i < b; ++i) {
        const double* u = e.unit.data() + i * d;
        const double* g = grad_unit.data() + i * d;
        double gu = 0.0;
        for (size_t k = 0; k < d; ++k) gu += g[k] * u[k];
        for (size_t k = 0; k < d; ++k) {
            result.grad_embeddings[i * d + k] = (g[k] - gu * u[k]) / e.norms[i];
        }
    }
    return result;
}

}  // namespace wildmatch
