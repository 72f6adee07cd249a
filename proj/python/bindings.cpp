#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "wildmatch/deep_matcher.hpp"
#include "wildmatch/grid.hpp"
#include "wildmatch/losses.hpp"
#include "wildmatch/simgen.hpp"
#include "wildmatch/splitting.hpp"
#include "wildmatch/trainer.hpp"

namespace py = pybind11;
namespace wm = wildmatch;

namespace {

wm::EmbeddingMatrix to_matrix(const py::array_t<float, py::array::c_style>& array,
                              bool normalize_rows) {
    if (array.ndim() != 2) throw wm::ShapeError("expected a 2-d float32 array");
    wm::EmbeddingMatrix m(static_cast<size_t>(array.shape(0)),
                          static_cast<size_t>(array.shape(1)));
    std::copy(array.data(), array.data() + array.size(), m.data().begin());
    for (size_t i = 0; i < m.rows(); ++i) m.row_ids()[i] = std::to_string(i);
    return normalize_rows ? wm::normalize(m) : m;
}

py::array_t<float> from_matrix(const wm::EmbeddingMatrix& m) {
    py::array_t<float> out({m.rows(), m.dim()});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

wm::Batch to_batch(const py::array_t<double, py::array::c_style>& embeddings,
                   const py::array_t<uint32_t, py::array::c_style>& labels) {
    if (embeddings.ndim() != 2) throw wm::ShapeError("expected a 2-d float64 array");
    if (labels.ndim() != 1 || labels.shape(0) != embeddings.shape(0)) {
        throw wm::ShapeError("labels must be 1-d with one entry per row");
    }
    wm::Batch batch;
    batch.size = static_cast<size_t>(embeddings.shape(0));
    batch.dim = static_cast<size_t>(embeddings.shape(1));
    batch.embeddings.assign(embeddings.data(), embeddings.data() + embeddings.size());
    batch.labels.assign(labels.data(), labels.data() + labels.size());
    return batch;
}

wm::Catalog make_catalog(const std::vector<std::string>& image_ids,
                         const std::vector<std::string>& identities) {
    if (image_ids.size() != identities.size()) {
        throw wm::ShapeError("image_ids and identities must align");
    }
    wm::Catalog catalog;
    for (size_t i = 0; i < image_ids.size(); ++i) {
        wm::ImageRecord r;
        r.image_id = image_ids[i];
        r.identity = identities[i];
        catalog.add(std::move(r));
    }
    return catalog;
}

}  // namespace

PYBIND11_MODULE(_wildmatch, m) {
    m.doc() = "wildlife re-identification toolkit core";

    py::register_exception<wm::Error>(m, "WildmatchError");

    m.def(
        "gen_embeddings",
        [](size_t n_identities, size_t images_per_identity, size_t dim,
           double concentration, uint64_t seed) {
            wm::SimSpec spec;
            spec.n_identities = n_identities;
            spec.images_per_identity = images_per_identity;
            spec.dim = dim;
            spec.concentration = concentration;
            spec.seed = seed;
            auto [catalog, features] = wm::gen_embeddings(spec);
            std::vector<std::string> ids, identities;
            for (const auto& r : catalog.records()) {
                ids.push_back(r.image_id);
                identities.push_back(r.identity);
            }
            return py::make_tuple(ids, identities, from_matrix(features));
        },
        py::arg("n_identities"), py::arg("images_per_identity"), py::arg("dim"),
        py::arg("concentration") = 50.0, py::arg("seed") = 0,
        "Synthetic identity-clustered unit embeddings: (image_ids, identities, "
        "features).");

    m.def(
        "topk",
        [](const py::array_t<float, py::array::c_style>& query,
           const py::array_t<float, py::array::c_style>& reference, size_t k,
           unsigned threads) {
            wm::TopKResult r =
                wm::topk(to_matrix(query, true), to_matrix(reference, true), k, threads);
            py::array_t<int64_t> indices({r.rows.size(), k});
            py::array_t<float> scores({r.rows.size(), k});
            for (size_t i = 0; i < r.rows.size(); ++i) {
                for (size_t j = 0; j < k; ++j) {
                    indices.mutable_at(i, j) = r.rows[i][j].index;
                    scores.mutable_at(i, j) = r.rows[i][j].score;
                }
            }
            return py::make_tuple(indices, scores);
        },
        py::arg("query"), py::arg("reference"), py::arg("k"), py::arg("threads") = 0,
        "Exact blocked cosine top-k; rows are L2-normalized first.");

    m.def(
        "match_accuracy",
        [](const py::array_t<float, py::array::c_style>& reference,
           const std::vector<std::string>& reference_labels,
           const py::array_t<float, py::array::c_style>& query,
           const std::vector<std::string>& query_labels, size_t vote_k) {
            wm::IdentityDatabase db =
                wm::build_database(to_matrix(reference, false), reference_labels);
            auto predictions = wm::match(db, to_matrix(query, false), 0, vote_k);
            return wm::evaluate(predictions, query_labels);
        },
        py::arg("reference"), py::arg("reference_labels"), py::arg("query"),
        py::arg("query_labels"), py::arg("vote_k") = 1,
        "Top-1 identification accuracy of k-NN identity matching.");

    m.def(
        "split",
        [](const std::vector<std::string>& image_ids,
           const std::vector<std::string>& identities, const std::string& mode,
           double ratio, uint64_t seed, double new_fraction) {
            wm::Catalog catalog = make_catalog(image_ids, identities);
            wm::SplitMode split_mode =
                mode == "open" || mode == "open-set"
                    ? wm::SplitMode::open_set(new_fraction)
                    : wm::mode_from_string(mode);
            wm::SplitManifest manifest = wm::split(catalog, split_mode, ratio, seed);
            if (!wm::verify(manifest, catalog).empty()) {
                throw wm::Error("internal: generated split fails verification");
            }
            return py::make_tuple(manifest.train_ids, manifest.test_ids);
        },
        py::arg("image_ids"), py::arg("identities"), py::arg("mode") = "closed",
        py::arg("ratio") = 0.8, py::arg("seed") = 0, py::arg("new_fraction") = 0.25,
        "Reference/query split by mode: closed, open, disjoint (no timestamps here).");

    m.def(
        "arcface_loss",
        [](const py::array_t<double, py::array::c_style>& embeddings,
           const py::array_t<uint32_t, py::array::c_style>& labels,
           const py::array_t<double, py::array::c_style>& weights, double margin,
           double scale) {
            if (weights.ndim() != 2) throw wm::ShapeError("weights must be 2-d");
            wm::Batch batch = to_batch(embeddings, labels);
            std::vector<double> w(weights.data(), weights.data() + weights.size());
            wm::ArcFaceConfig config{margin, scale,
                                     static_cast<size_t>(weights.shape(0))};
            wm::ArcFaceResult r = wm::arcface_loss(batch, w, config);
            py::array_t<double> ge({batch.size, batch.dim});
            std::copy(r.grad_embeddings.begin(), r.grad_embeddings.end(),
                      ge.mutable_data());
            py::array_t<double> gw(
                {static_cast<size_t>(weights.shape(0)), batch.dim});
            std::copy(r.grad_weights.begin(), r.grad_weights.end(), gw.mutable_data());
            return py::make_tuple(r.loss, ge, gw);
        },
        py::arg("embeddings"), py::arg("labels"), py::arg("weights"),
        py::arg("margin") = 0.5, py::arg("scale") = 64.0,
        "Additive angular margin loss: (loss, grad_embeddings, grad_weights).");

    m.def(
        "triplet_loss",
        [](const py::array_t<double, py::array::c_style>& embeddings,
           const py::array_t<uint32_t, py::array::c_style>& labels, double margin,
           const std::string& mining) {
            wm::Batch batch = to_batch(embeddings, labels);
            wm::TripletConfig config{margin, wm::mining_from_string(mining)};
            wm::TripletResult r = wm::triplet_loss(batch, config);
            py::array_t<double> grad({batch.size, batch.dim});
            std::copy(r.grad_embeddings.begin(), r.grad_embeddings.end(),
                      grad.mutable_data());
            return py::make_tuple(r.loss, grad, r.n_active);
        },
        py::arg("embeddings"), py::arg("labels"), py::arg("margin") = 0.2,
        py::arg("mining") = "all",
        "Mined triplet hinge loss: (loss, grad_embeddings, n_active).");

    m.def(
        "train_head",
        [](const py::array_t<float, py::array::c_style>& features,
           const std::vector<std::string>& labels, const std::string& loss_name,
           double margin, double scale, const std::string& mining, double lr,
           size_t epochs, size_t batch_size, size_t embed_dim, uint64_t seed) {
            wm::LossConfig loss;
            if (loss_name == "arcface") {
                loss.kind = wm::LossConfig::Kind::ArcFace;
                loss.arcface.margin = margin;
                loss.arcface.scale = scale;
            } else if (loss_name == "triplet") {
                loss.kind = wm::LossConfig::Kind::Triplet;
                loss.triplet.margin = margin;
                loss.triplet.mining = wm::mining_from_string(mining);
            } else {
                throw wm::PreconditionError("unknown loss '" + loss_name + "'");
            }
            wm::TrainerConfig config;
            config.lr = lr;
            config.epochs = epochs;
            config.batch_size = batch_size;
            config.embed_dim = embed_dim;
            config.seed = seed;
            wm::TrainResult head =
                wm::train_head(to_matrix(features, false), labels, loss, config);
            py::array_t<double> projection({head.in_dim, head.out_dim});
            std::copy(head.projection.begin(), head.projection.end(),
                      projection.mutable_data());
            std::vector<double> losses;
            for (const auto& stat : head.trace) losses.push_back(stat.mean_loss);
            return py::make_tuple(projection, head.diverged, losses);
        },
        py::arg("features"), py::arg("labels"), py::arg("loss") = "arcface",
        py::arg("margin") = 0.5, py::arg("scale") = 64.0, py::arg("mining") = "all",
        py::arg("lr") = 0.001, py::arg("epochs") = 100, py::arg("batch_size") = 128,
        py::arg("embed_dim") = 0, py::arg("seed") = 0,
        "Linear metric head over precomputed features: (projection, diverged, "
        "epoch_losses).");

    m.def(
        "grid_settings",
        [](const std::string& spec_text) {
            std::istringstream in(spec_text);
            wm::GridSpec spec = wm::read_grid_spec(in);
            std::vector<std::string> keys;
            for (const wm::GridSetting& s : wm::enumerate_grid(spec)) {
                keys.push_back(s.key());
            }
            return keys;
        },
        py::arg("spec_text"),
        "Deterministic enumeration of a grid spec, one key per setting.");
}
