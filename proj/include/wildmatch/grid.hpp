#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wildmatch/catalog.hpp"
#include "wildmatch/embedding.hpp"
#include "wildmatch/splitting.hpp"
#include "wildmatch/trainer.hpp"

namespace wildmatch {

struct GridAxis {
    std::string name;
    std::vector<std::string> values;
};

/// Hyperparameter grid: shared axes apply to every method, per-method axes
/// only to their method. Total combinations =
/// sum over methods of (product of shared axes) * (product of method axes).
struct GridSpec {
    std::vector<GridAxis> shared;
    std::vector<std::pair<std::string, std::vector<GridAxis>>> methods;

    void validate() const;
    size_t combination_count() const;
};

struct GridSetting {
    std::string method;
    std::vector<std::pair<std::string, std::string>> values;

    std::string key() const;
    std::optional<std::string> value(const std::string& name) const;
};

/// Deterministic enumeration: methods in declared order, axes as declared,
/// the last axis cycling fastest.
std::vector<GridSetting> enumerate_grid(const GridSpec& spec);

/// Flat "name = v1, v2, ..." lines; a "method.name" key attaches the axis to
/// that method, a bare key is shared. '#' starts a comment.
GridSpec read_grid_spec(std::istream& in);
void write_grid_spec(const GridSpec& spec, std::ostream& out);

struct GridDataset {
    std::string tag;
    Catalog catalog;
    EmbeddingMatrix features;
    SplitManifest manifest;
};

struct RunRecord {
    std::string dataset;
    GridSetting setting;
    uint64_t seed = 0;
    bool diverged = false;
    double accuracy = 0.0;  // meaningful iff !diverged
};

struct RunGridConfig {
    size_t epochs = 100;
    size_t batch_size = 128;
    size_t embed_dim = 0;
    unsigned threads = 1;
    uint64_t seed = 0;
};

/// One record per (setting x dataset): train on the reference side of the
/// manifest, score 1-NN accuracy on the query side. Every manifest is
/// audited first; a single violation aborts the whole grid. Records are
/// ordered (setting-major) regardless of worker scheduling.
std::vector<RunRecord> run_grid(const GridSpec& spec,
                                const std::vector<GridDataset>& datasets,
                                const RunGridConfig& config);

enum class GroupBy { Setting, Dataset };

struct AggregateStats {
    size_t n = 0;
    double median = 0, q25 = 0, q75 = 0, mean = 0, min = 0, max = 0;
    bool empty = true;
};

/// Quantiles by linear interpolation between closest ranks (index p*(n-1)).
AggregateStats compute_stats(std::vector<double> values);

/// Diverged records are excluded; a group with only diverged runs is
/// reported with empty stats rather than dropped.
std::map<std::string, AggregateStats> aggregate(const std::vector<RunRecord>& records,
                                                GroupBy group_by);

/// Line-delimited persistence, one record per line, resumable.
void write_records(const std::vector<RunRecord>& records, std::ostream& out);
std::vector<RunRecord> read_records(std::istream& in);

void write_aggregates(const std::map<std::string, AggregateStats>& stats,
                      std::ostream& out, char delimiter = ',');

/// Per group: five-number summary plus the raw values, for external plotting.
void write_boxplot_data(const std::vector<RunRecord>& records, GroupBy group_by,
                        std::ostream& out, char delimiter = ',');

/// Accuracy table: one row per dataset, one column per method.
struct ReportTable {
    std::vector<std::string> methods;
    std::vector<std::pair<std::string, std::vector<std::optional<double>>>> rows;
};

ReportTable read_report_table(std::istream& in, char delimiter = ',');

/// Plain delimiter-separated values.
std::string report_plain(const ReportTable& table, char delimiter = ',');

/// Markdown table with the per-row best value(s) in bold and the second
/// best in italics; equal values share the higher mark.
std::string report_markup(const ReportTable& table);

}  // namespace wildmatch
