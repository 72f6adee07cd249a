#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "wildmatch/catalog.hpp"
#include "wildmatch/deep_matcher.hpp"
#include "wildmatch/descriptors.hpp"
#include "wildmatch/embedding.hpp"
#include "wildmatch/grid.hpp"
#include "wildmatch/local_matcher.hpp"
#include "wildmatch/simgen.hpp"
#include "wildmatch/splitting.hpp"
#include "wildmatch/trainer.hpp"

namespace wm = wildmatch;

namespace {

// Outputs are staged in a temp file and renamed so a failure never leaves a
// partial file behind.
template <typename WriteFn>
void write_atomic(const std::string& path, WriteFn&& write) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw wm::Error("cannot open '" + tmp + "' for writing");
        write(out);
        out.flush();
        if (!out) throw wm::Error("failed writing '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path);
}

// For writers that take a path (binary containers).
template <typename WriteFn>
void write_atomic_path(const std::string& path, WriteFn&& write) {
    std::string tmp = path + ".tmp";
    write(tmp);
    std::filesystem::rename(tmp, path);
}

unsigned default_threads() {
    if (const char* env = std::getenv("WILDMATCH_THREADS")) {
        int v = std::atoi(env);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    return 0;  // auto
}

std::vector<std::string> labels_for(const wm::Catalog& catalog,
                                    const std::vector<std::string>& image_ids) {
    std::vector<std::string> labels;
    labels.reserve(image_ids.size());
    for (const std::string& id : image_ids) labels.push_back(catalog.at(id).identity);
    return labels;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wildmatch: wildlife re-identification matching toolkit"};
    app.require_subcommand(1);

    unsigned threads = default_threads();
    uint64_t seed = 0;
    app.add_option("--threads", threads, "worker threads (0 = hardware)");
    app.add_option("--seed", seed, "global random seed");

    // --- simgen ---
    auto* cmd_simgen = app.add_subcommand("simgen", "generate synthetic data");
    wm::SimSpec sim;
    size_t sim_descriptors = 0;
    std::string sim_prefix;
    cmd_simgen->add_option("--ids", sim.n_identities, "number of identities");
    cmd_simgen->add_option("--images", sim.images_per_identity, "images per identity");
    cmd_simgen->add_option("--dim", sim.dim, "embedding/descriptor dimension");
    cmd_simgen->add_option("--concentration", sim.concentration, "cluster tightness");
    cmd_simgen->add_option("--periods", sim.n_periods, "timestamp days per identity");
    cmd_simgen->add_option("--tag", sim.dataset_tag, "dataset tag");
    cmd_simgen->add_option("--descriptors", sim_descriptors,
                           "also emit a .wdds file with this many descriptors/image");
    cmd_simgen->add_option("--out-prefix", sim_prefix, "output prefix")->required();

    // --- ingest ---
    auto* cmd_ingest = app.add_subcommand("ingest", "ingest a metadata file");
    std::string in_path, out_path;
    wm::IngestSchema schema;
    std::string delim = ",";
    cmd_ingest->add_option("--input", in_path)->required();
    cmd_ingest->add_option("--output", out_path)->required();
    cmd_ingest->add_option("--delimiter", delim);
    cmd_ingest->add_option("--id-column", schema.image_id_column);
    cmd_ingest->add_option("--identity-column", schema.identity_column);

    // --- stats ---
    auto* cmd_stats = app.add_subcommand("stats", "catalog statistics");
    std::string stats_path;
    cmd_stats->add_option("--input", stats_path)->required();

    // --- split ---
    auto* cmd_split = app.add_subcommand("split", "produce a split manifest");
    std::string split_catalog, split_mode = "closed", split_out;
    double split_ratio = 0.8, open_fraction = 0.25;
    cmd_split->add_option("--catalog", split_catalog)->required();
    cmd_split->add_option("--mode", split_mode, "closed|open|disjoint|time");
    cmd_split->add_option("--ratio", split_ratio);
    cmd_split->add_option("--new-fraction", open_fraction, "open-set new-identity fraction");
    cmd_split->add_option("--output", split_out)->required();

    // --- verify-split ---
    auto* cmd_verify = app.add_subcommand("verify-split", "audit a manifest");
    std::string verify_catalog, verify_manifest;
    cmd_verify->add_option("--catalog", verify_catalog)->required();
    cmd_verify->add_option("--manifest", verify_manifest)->required();

    // --- match ---
    auto* cmd_match = app.add_subcommand("match", "1-NN embedding matching");
    std::string match_ref, match_labels, match_query, match_out;
    size_t vote_k = 1;
    cmd_match->add_option("--db", match_ref, "reference embeddings (.wdem)")->required();
    cmd_match->add_option("--labels", match_labels, "catalog with identities")->required();
    cmd_match->add_option("--query", match_query, "query embeddings (.wdem)")->required();
    cmd_match->add_option("--vote-k", vote_k, "majority vote among top-k (default 1)");
    cmd_match->add_option("--output", match_out)->required();

    // --- local-match ---
    auto* cmd_local = app.add_subcommand("local-match", "ratio-test descriptor matching");
    std::string local_ref, local_labels, local_query, local_out;
    double local_threshold = 0.8;
    bool local_calibrate = false, local_per_identity = false;
    cmd_local->add_option("--db", local_ref, "reference descriptors (.wdds)")->required();
    cmd_local->add_option("--labels", local_labels)->required();
    cmd_local->add_option("--query", local_query)->required();
    cmd_local->add_option("--threshold", local_threshold);
    cmd_local->add_flag("--calibrate", local_calibrate,
                        "calibrate the threshold on the reference set first");
    cmd_local->add_flag("--per-identity", local_per_identity,
                        "aggregate correspondences per identity instead of per image");
    cmd_local->add_option("--output", local_out)->required();

    // --- calibrate ---
    auto* cmd_calibrate = app.add_subcommand("calibrate", "ratio-test threshold calibration");
    std::string cal_ref, cal_labels, cal_grid;
    cmd_calibrate->add_option("--db", cal_ref)->required();
    cmd_calibrate->add_option("--labels", cal_labels)->required();
    cmd_calibrate->add_option("--grid", cal_grid, "comma-separated thresholds");

    // --- train-head ---
    auto* cmd_train = app.add_subcommand("train-head", "train a linear metric head");
    std::string train_features, train_labels, train_loss = "arcface";
    std::string train_out, trace_out, train_mining = "all";
    wm::TrainerConfig trainer_config;
    double loss_margin = -1.0, loss_scale = 64.0;
    cmd_train->add_option("--features", train_features)->required();
    cmd_train->add_option("--labels", train_labels)->required();
    cmd_train->add_option("--loss", train_loss, "arcface|triplet");
    cmd_train->add_option("--margin", loss_margin);
    cmd_train->add_option("--scale", loss_scale, "arcface scale");
    cmd_train->add_option("--mining", train_mining, "all|semi|semi-band|hard");
    cmd_train->add_option("--lr", trainer_config.lr);
    cmd_train->add_option("--epochs", trainer_config.epochs);
    cmd_train->add_option("--batch", trainer_config.batch_size);
    cmd_train->add_option("--embed-dim", trainer_config.embed_dim);
    cmd_train->add_option("--output", train_out, "projection matrix (.wdem)")->required();
    cmd_train->add_option("--trace", trace_out, "per-epoch loss trace");

    // --- grid ---
    auto* cmd_grid = app.add_subcommand("grid", "hyperparameter grid search");
    std::string grid_spec_path, grid_out;
    std::vector<std::string> grid_datasets;
    wm::RunGridConfig grid_config;
    cmd_grid->add_option("--spec", grid_spec_path)->required();
    cmd_grid->add_option("--datasets", grid_datasets,
                         "dataset prefixes (expects <p>.catalog.csv, <p>.wdem, <p>.manifest)")
        ->required();
    cmd_grid->add_option("--epochs", grid_config.epochs);
    cmd_grid->add_option("--batch", grid_config.batch_size);
    cmd_grid->add_option("--embed-dim", grid_config.embed_dim);
    cmd_grid->add_option("--output", grid_out)->required();

    // --- aggregate ---
    auto* cmd_aggregate = app.add_subcommand("aggregate", "aggregate run records");
    std::string agg_records, agg_group = "setting", agg_out, agg_boxplot;
    cmd_aggregate->add_option("--records", agg_records)->required();
    cmd_aggregate->add_option("--group-by", agg_group, "setting|dataset");
    cmd_aggregate->add_option("--output", agg_out)->required();
    cmd_aggregate->add_option("--boxplot", agg_boxplot, "boxplot data export");

    // --- report ---
    auto* cmd_report = app.add_subcommand("report", "emit accuracy tables");
    std::string report_in, report_out, report_markup_out;
    cmd_report->add_option("--input", report_in, "dataset x method accuracy table")->required();
    cmd_report->add_option("--output", report_out, "plain table output");
    cmd_report->add_option("--markup", report_markup_out, "markdown table output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*cmd_simgen) {
            sim.seed = seed;
            auto [catalog, embeddings] = wm::gen_embeddings(sim);
            write_atomic(sim_prefix + ".catalog.csv",
                         [&](std::ostream& out) { wm::emit_catalog(catalog, out); });
            write_atomic_path(sim_prefix + ".wdem", [&](const std::string& p) {
                wm::write_embeddings(embeddings, p);
            });
            if (sim_descriptors > 0) {
                auto [dcat, sets] = wm::gen_descriptors(sim, sim_descriptors);
                write_atomic_path(sim_prefix + ".wdds", [&](const std::string& p) {
                    wm::write_descriptors(sets, p);
                });
            }
        } else if (*cmd_ingest) {
            schema.delimiter = delim.empty() ? ',' : delim[0];
            wm::Catalog catalog = wm::ingest_catalog_file(in_path, schema);
            write_atomic(out_path, [&](std::ostream& out) {
                wm::emit_catalog(catalog, out, schema.delimiter);
            });
        } else if (*cmd_stats) {
            wm::Catalog catalog = wm::ingest_catalog_file(stats_path, {});
            wm::CatalogStats stats = wm::compute_stats(catalog);
            std::cout << "images: " << stats.n_images << '\n'
                      << "identities: " << stats.n_identities << '\n'
                      << "timestamps: " << (stats.has_timestamps ? "complete" : "incomplete")
                      << '\n';
            for (const auto& [identity, count] : stats.images_per_identity) {
                std::cout << identity << ": " << count << '\n';
            }
        } else if (*cmd_split) {
            wm::Catalog catalog = wm::ingest_catalog_file(split_catalog, {});
            wm::SplitMode mode = wm::mode_from_string(
                split_mode == "open" || split_mode == "open-set"
                    ? "open-set " + std::to_string(open_fraction)
                    : split_mode);
            wm::SplitManifest manifest = wm::split(catalog, mode, split_ratio, seed);
            write_atomic(split_out,
                         [&](std::ostream& out) { wm::write_manifest(manifest, out); });
        } else if (*cmd_verify) {
            wm::Catalog catalog = wm::ingest_catalog_file(verify_catalog, {});
            std::ifstream in(verify_manifest);
            if (!in) throw wm::Error("cannot open '" + verify_manifest + "'");
            wm::SplitManifest manifest = wm::read_manifest(in);
            std::vector<std::string> violations = wm::verify(manifest, catalog);
            for (const std::string& v : violations) std::cout << v << '\n';
            if (!violations.empty()) return 1;
            std::cout << "ok\n";
        } else if (*cmd_match) {
            wm::Catalog catalog = wm::ingest_catalog_file(match_labels, {});
            wm::EmbeddingMatrix reference = wm::read_embeddings(match_ref);
            wm::EmbeddingMatrix query = wm::read_embeddings(match_query);
            wm::IdentityDatabase db = wm::build_database(
                reference, labels_for(catalog, reference.row_ids()));
            auto predictions = wm::match(db, query, threads, vote_k);
            write_atomic(match_out, [&](std::ostream& out) {
                wm::write_predictions(predictions, out);
            });
        } else if (*cmd_local) {
            wm::Catalog catalog = wm::ingest_catalog_file(local_labels, {});
            std::vector<wm::DescriptorSet> reference = wm::read_descriptors(local_ref);
            std::vector<wm::DescriptorSet> queries = wm::read_descriptors(local_query);
            std::vector<std::string> identities;
            for (const auto& s : reference) identities.push_back(catalog.at(s.image_id).identity);
            wm::LocalAggregation aggregation = local_per_identity
                                                   ? wm::LocalAggregation::PerIdentitySum
                                                   : wm::LocalAggregation::PerImage;
            if (local_calibrate) {
                local_threshold = wm::calibrate_threshold(
                    reference, identities, wm::RatioTestConfig{}.candidate_grid, threads,
                    aggregation);
                std::cerr << "calibrated threshold: " << local_threshold << '\n';
            }
            auto tallies = wm::pair_correspondences_all(queries, reference,
                                                        local_threshold, threads);
            write_atomic(local_out, [&](std::ostream& out) {
                out << "query_id,predicted_identity,best_reference_id,correspondences\n";
                for (const auto& tally : tallies) {
                    wm::LocalPrediction p = wm::predict_identity(tally, reference,
                                                                 identities, aggregation);
                    if (p.matched) {
                        out << p.query_id << ',' << p.predicted_identity << ','
                            << p.best_reference_id << ',' << p.correspondences << '\n';
                    } else {
                        out << p.query_id << ",no-match,,0\n";
                    }
                }
            });
        } else if (*cmd_calibrate) {
            wm::Catalog catalog = wm::ingest_catalog_file(cal_labels, {});
            std::vector<wm::DescriptorSet> reference = wm::read_descriptors(cal_ref);
            std::vector<std::string> identities;
            for (const auto& s : reference) identities.push_back(catalog.at(s.image_id).identity);
            std::vector<double> grid = wm::RatioTestConfig{}.candidate_grid;
            if (!cal_grid.empty()) {
                grid.clear();
                std::istringstream ss(cal_grid);
                std::string item;
                while (std::getline(ss, item, ',')) grid.push_back(std::stod(item));
            }
            std::cout << wm::calibrate_threshold(reference, identities, grid, threads)
                      << '\n';
        } else if (*cmd_train) {
            wm::Catalog catalog = wm::ingest_catalog_file(train_labels, {});
            wm::EmbeddingMatrix features = wm::read_embeddings(train_features);
            wm::LossConfig loss;
            if (train_loss == "arcface") {
                loss.kind = wm::LossConfig::Kind::ArcFace;
                loss.arcface.margin = loss_margin < 0 ? 0.5 : loss_margin;
                loss.arcface.scale = loss_scale;
            } else if (train_loss == "triplet") {
                loss.kind = wm::LossConfig::Kind::Triplet;
                loss.triplet.margin = loss_margin < 0 ? 0.2 : loss_margin;
                loss.triplet.mining = wm::mining_from_string(train_mining);
            } else {
                throw wm::PreconditionError("unknown loss '" + train_loss + "'");
            }
            trainer_config.seed = seed;
            wm::TrainResult head = wm::train_head(
                features, labels_for(catalog, features.row_ids()), loss, trainer_config);
            if (!trace_out.empty()) {
                write_atomic(trace_out,
                             [&](std::ostream& out) { wm::write_trace(head.trace, out); });
            }
            if (head.diverged) {
                throw wm::Error("training diverged at epoch " +
                                std::to_string(head.diverged_epoch));
            }
            wm::EmbeddingMatrix w(head.in_dim, head.out_dim);
            for (size_t i = 0; i < head.projection.size(); ++i) {
                w.data()[i] = static_cast<float>(head.projection[i]);
            }
            for (size_t i = 0; i < head.in_dim; ++i) {
                w.row_ids()[i] = "w" + std::to_string(i);
            }
            write_atomic_path(train_out, [&](const std::string& p) {
                wm::write_embeddings(w, p);
            });
        } else if (*cmd_grid) {
            std::ifstream spec_in(grid_spec_path);
            if (!spec_in) throw wm::Error("cannot open '" + grid_spec_path + "'");
            wm::GridSpec spec = wm::read_grid_spec(spec_in);
            std::cerr << wm::enumerate_grid(spec).size() << " settings enumerated\n";
            std::vector<wm::GridDataset> datasets;
            for (const std::string& prefix : grid_datasets) {
                wm::GridDataset d;
                d.tag = std::filesystem::path(prefix).filename().string();
                d.catalog = wm::ingest_catalog_file(prefix + ".catalog.csv", {});
                d.features = wm::read_embeddings(prefix + ".wdem");
                std::ifstream min(prefix + ".manifest");
                if (!min) throw wm::Error("cannot open '" + prefix + ".manifest'");
                d.manifest = wm::read_manifest(min);
                datasets.push_back(std::move(d));
            }
            grid_config.threads = threads;
            grid_config.seed = seed;
            auto records = wm::run_grid(spec, datasets, grid_config);
            size_t diverged = 0;
            for (const auto& r : records) diverged += r.diverged ? 1 : 0;
            if (diverged > 0) {
                std::cerr << diverged << " runs diverged and are excluded from aggregation\n";
            }
            write_atomic(grid_out,
                         [&](std::ostream& out) { wm::write_records(records, out); });
        } else if (*cmd_aggregate) {
            std::ifstream in(agg_records);
            if (!in) throw wm::Error("cannot open '" + agg_records + "'");
            auto records = wm::read_records(in);
            wm::GroupBy group_by = agg_group == "dataset" ? wm::GroupBy::Dataset
                                                          : wm::GroupBy::Setting;
            auto stats = wm::aggregate(records, group_by);
            write_atomic(agg_out,
                         [&](std::ostream& out) { wm::write_aggregates(stats, out); });
            if (!agg_boxplot.empty()) {
                write_atomic(agg_boxplot, [&](std::ostream& out) {
                    wm::write_boxplot_data(records, group_by, out);
                });
            }
        } else if (*cmd_report) {
            std::ifstream in(report_in);
            if (!in) throw wm::Error("cannot open '" + report_in + "'");
            wm::ReportTable table = wm::read_report_table(in);
            if (report_out.empty() && report_markup_out.empty()) {
                std::cout << wm::report_plain(table);
            }
            if (!report_out.empty()) {
                write_atomic(report_out,
                             [&](std::ostream& out) { out << wm::report_plain(table); });
            }
            if (!report_markup_out.empty()) {
                write_atomic(report_markup_out,
                             [&](std::ostream& out) { out << wm::report_markup(table); });
            }
        }
    } catch (const wm::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
