#include "wildmatch/grid.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "wildmatch/deep_matcher.hpp"

namespace wildmatch {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_values(const std::string& s, char delimiter) {
    std::vector<std::string> out;
    std::istringstream ss(s);
    std::string item;
    while (std::getline(ss, item, delimiter)) out.push_back(trim(item));
    return out;
}

size_t product_of(const std::vector<GridAxis>& axes) {
    size_t p = 1;
    for (const GridAxis& a : axes) p *= a.values.size();
    return p;
}

void fmt_buf_value(char* buf, size_t n, double v) {
    std::snprintf(buf, n, "%.9g", v);
}

}  // namespace

void GridSpec::validate() const {
    auto check = [](const GridAxis& axis) {
        if (axis.name.empty()) throw PreconditionError("grid axis without a name");
        if (axis.values.empty()) {
            throw PreconditionError("grid axis '" + axis.name + "' has no values");
        }
    };
    for (const GridAxis& a : shared) check(a);
    if (methods.empty()) throw PreconditionError("grid spec declares no method");
    for (const auto& [method, axes] : methods) {
        for (const GridAxis& a : axes) check(a);
    }
}

size_t GridSpec::combination_count() const {
    size_t total = 0;
    for (const auto& [method, axes] : methods) {
        total += product_of(shared) * product_of(axes);
    }
    return total;
}

std::string GridSetting::key() const {
    std::string k = method;
    for (const auto& [name, value] : values) {
        k += ';';
        k += name;
        k += '=';
        k += value;
    }
    return k;
}

std::optional<std::string> GridSetting::value(const std::string& name) const {
    for (const auto& [n, v] : values) {
        if (n == name) return v;
    }
    return std::nullopt;
}

std::vector<GridSetting> enumerate_grid(const GridSpec& spec) {
    spec.validate();
    std::vector<GridSetting> settings;
    for (const auto& [method, method_axes] : spec.methods) {
        std::vector<GridAxis> axes = spec.shared;
        axes.insert(axes.end(), method_axes.begin(), method_axes.end());
        if (axes.empty()) {
            settings.push_back(GridSetting{method, {}});
            continue;
        }

        std::vector<size_t> odometer(axes.size(), 0);
        for (;;) {
            GridSetting s;
            s.method = method;
            for (size_t i = 0; i < axes.size(); ++i) {
                s.values.emplace_back(axes[i].name, axes[i].values[odometer[i]]);
            }
            settings.push_back(std::move(s));
            // advance, last axis fastest
            size_t i = axes.size();
            while (i > 0) {
                --i;
                if (++odometer[i] < axes[i].values.size()) break;
                odometer[i] = 0;
                if (i == 0) goto next_method;
            }
        }
    next_method:;
    }
    return settings;
}

GridSpec read_grid_spec(std::istream& in) {
    GridSpec spec;
    std::string line;
    while (std::getline(in, line)) {
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError("grid spec: expected 'name = values', got '" + line + "'");
        }
        std::string key = trim(line.substr(0, eq));
        GridAxis axis;
        axis.values = split_values(line.substr(eq + 1), ',');
        size_t dot = key.find('.');
        if (dot == std::string::npos) {
            axis.name = key;
            spec.shared.push_back(std::move(axis));
        } else {
            std::string method = key.substr(0, dot);
            axis.name = key;  // keep the qualified name
            auto it = std::find_if(spec.methods.begin(), spec.methods.end(),
                                   [&](const auto& m) { return m.first == method; });
            if (it == spec.methods.end()) {
                spec.methods.push_back({method, {std::move(axis)}});
            } else {
                it->second.push_back(std::move(axis));
            }
        }
    }
    spec.validate();
    return spec;
}

void write_grid_spec(const GridSpec& spec, std::ostream& out) {
    auto emit = [&](const GridAxis& axis) {
        out << axis.name << " = ";
        for (size_t i = 0; i < axis.values.size(); ++i) {
            if (i) out << ", ";
            out << axis.values[i];
        }
        out << '\n';
    };
    for (const GridAxis& a : spec.shared) emit(a);
    for (const auto& [method, axes] : spec.methods) {
        for (const GridAxis& a : axes) emit(a);
    }
}

namespace {

LossConfig loss_from_setting(const GridSetting& setting) {
    LossConfig loss;
    if (setting.method == "arcface") {
        loss.kind = LossConfig::Kind::ArcFace;
        if (auto v = setting.value("arcface.margin")) loss.arcface.margin = std::stod(*v);
        if (auto v = setting.value("arcface.scale")) loss.arcface.scale = std::stod(*v);
    } else if (setting.method == "triplet") {
        loss.kind = LossConfig::Kind::Triplet;
        if (auto v = setting.value("triplet.margin")) loss.triplet.margin = std::stod(*v);
        if (auto v = setting.value("triplet.mining")) {
            loss.triplet.mining = mining_from_string(*v);
        }
    } else {
        throw PreconditionError("unknown grid method '" + setting.method +
                                "' (expected arcface or triplet)");
    }
    return loss;
}

struct SubsetViews {
    EmbeddingMatrix features;
    std::vector<std::string> labels;
};

SubsetViews subset(const GridDataset& dataset, const std::vector<std::string>& ids) {
    std::map<std::string, size_t> row_of;
    for (size_t i = 0; i < dataset.features.rows(); ++i) {
        row_of[dataset.features.row_ids()[i]] = i;
    }
    SubsetViews out;
    out.features = EmbeddingMatrix(ids.size(), dataset.features.dim());
    out.labels.reserve(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) {
        auto it = row_of.find(ids[i]);
        if (it == row_of.end()) {
            throw Error("dataset '" + dataset.tag + "': no feature row for image '" +
                        ids[i] + "'");
        }
        auto src = dataset.features.row(it->second);
        std::copy(src.begin(), src.end(), out.features.row(i).begin());
        out.features.row_ids()[i] = ids[i];
        out.labels.push_back(dataset.catalog.at(ids[i]).identity);
    }
    return out;
}

}  // namespace

std::vector<RunRecord> run_grid(const GridSpec& spec,
                                const std::vector<GridDataset>& datasets,
                                const RunGridConfig& config) {
    if (datasets.empty()) throw PreconditionError("run_grid: no datasets");
    for (const GridDataset& d : datasets) {
        std::vector<std::string> violations = verify(d.manifest, d.catalog);
        if (!violations.empty()) {
            throw PreconditionError("run_grid: invalid manifest for dataset '" + d.tag +
                                    "': " + violations.front());
        }
    }

    std::vector<GridSetting> settings = enumerate_grid(spec);
    const size_t n_tasks = settings.size() * datasets.size();
    std::vector<RunRecord> records(n_tasks);

    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            size_t task = next.fetch_add(1);
            if (task >= n_tasks) break;
            const GridSetting& setting = settings[task / datasets.size()];
            const GridDataset& dataset = datasets[task % datasets.size()];

            RunRecord record;
            record.dataset = dataset.tag;
            record.setting = setting;
            record.seed = Rng::mix(config.seed,
                                   hash_string(setting.key() + '\n' + dataset.tag));

            TrainerConfig trainer;
            trainer.epochs = config.epochs;
            trainer.batch_size = config.batch_size;
            trainer.embed_dim = config.embed_dim;
            trainer.seed = record.seed;
            if (auto v = setting.value("lr")) trainer.lr = std::stod(*v);

            SubsetViews train = subset(dataset, dataset.manifest.train_ids);
            SubsetViews test = subset(dataset, dataset.manifest.test_ids);

            TrainResult head =
                train_head(train.features, train.labels, loss_from_setting(setting),
                           trainer);
            if (head.diverged) {
                record.diverged = true;
            } else {
                IdentityDatabase db =
                    build_database(project(train.features, head), train.labels);
                auto predictions = match(db, project(test.features, head), 1);
                record.accuracy = evaluate(predictions, test.labels);
            }
            records[task] = std::move(record);
        }
    };

    unsigned threads = std::max(1u, config.threads);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return records;
}

AggregateStats compute_stats(std::vector<double> values) {
    AggregateStats stats;
    if (values.empty()) return stats;
    std::sort(values.begin(), values.end());
    auto quantile = [&](double p) {
        double h = p * static_cast<double>(values.size() - 1);
        size_t lo = static_cast<size_t>(std::floor(h));
        size_t hi = std::min(lo + 1, values.size() - 1);
        double frac = h - static_cast<double>(lo);
        return values[lo] + frac * (values[hi] - values[lo]);
    };
    stats.empty = false;
    stats.n = values.size();
    stats.min = values.front();
    stats.max = values.back();
    stats.q25 = quantile(0.25);
    stats.median = quantile(0.5);
    stats.q75 = quantile(0.75);
    stats.mean = std::accumulate(values.begin(), values.end(), 0.0) /
                 static_cast<double>(values.size());
    return stats;
}

std::map<std::string, AggregateStats> aggregate(const std::vector<RunRecord>& records,
                                                GroupBy group_by) {
    std::map<std::string, std::vector<double>> groups;
    for (const RunRecord& r : records) {
        std::string key = group_by == GroupBy::Setting ? r.setting.key() : r.dataset;
        auto& values = groups[key];  // group exists even if every run diverged
        if (!r.diverged) values.push_back(r.accuracy);
    }
    std::map<std::string, AggregateStats> out;
    for (auto& [key, values] : groups) out[key] = compute_stats(std::move(values));
    return out;
}

void write_records(const std::vector<RunRecord>& records, std::ostream& out) {
    for (const RunRecord& r : records) {
        char acc[32];
        fmt_buf_value(acc, sizeof(acc), r.accuracy);
        out << r.dataset << '\t' << r.setting.method << '\t';
        for (size_t i = 0; i < r.setting.values.size(); ++i) {
            if (i) out << ',';
            out << r.setting.values[i].first << '=' << r.setting.values[i].second;
        }
        out << '\t' << r.seed << '\t' << (r.diverged ? 1 : 0) << '\t'
            << (r.diverged ? "-" : acc) << '\n';
    }
}

std::vector<RunRecord> read_records(std::istream& in) {
    std::vector<RunRecord> records;
    std::string line;
    size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        std::vector<std::string> fields = split_values(line, '\t');
        if (fields.size() != 6) {
            throw FormatError("records line " + std::to_string(line_number) +
                              ": expected 6 tab-separated fields");
        }
        RunRecord r;
        r.dataset = fields[0];
        r.setting.method = fields[1];
        if (!fields[2].empty()) {
            for (const std::string& pair : split_values(fields[2], ',')) {
                size_t eq = pair.find('=');
                if (eq == std::string::npos) {
                    throw FormatError("records line " + std::to_string(line_number) +
                                      ": bad setting value '" + pair + "'");
                }
                r.setting.values.emplace_back(pair.substr(0, eq), pair.substr(eq + 1));
            }
        }
        r.seed = std::stoull(fields[3]);
        r.diverged = fields[4] == "1";
        if (!r.diverged) r.accuracy = std::stod(fields[5]);
        records.push_back(std::move(r));
    }
    return records;
}

void write_aggregates(const std::map<std::string, AggregateStats>& stats,
                      std::ostream& out, char delimiter) {
    out << "group" << delimiter << "n" << delimiter << "min" << delimiter << "q25"
        << delimiter << "median" << delimiter << "q75" << delimiter << "max"
        << delimiter << "mean" << delimiter << "quantile_method" << '\n';
    for (const auto& [key, s] : stats) {
        if (s.empty) {
            out << key << delimiter << 0 << delimiter << "-" << delimiter << "-"
                << delimiter << "-" << delimiter << "-" << delimiter << "-" << delimiter
                << "-" << delimiter << "linear-interpolation" << '\n';
            continue;
        }
        char buf[6][32];
        fmt_buf_value(buf[0], 32, s.min);
        fmt_buf_value(buf[1], 32, s.q25);
        fmt_buf_value(buf[2], 32, s.median);
        fmt_buf_value(buf[3], 32, s.q75);
        fmt_buf_value(buf[4], 32, s.max);
        fmt_buf_value(buf[5], 32, s.mean);
        out << key << delimiter << s.n;
        for (const char* b : {buf[0], buf[1], buf[2], buf[3], buf[4], buf[5]}) {
            out << delimiter << b;
        }
        out << delimiter << "linear-interpolation" << '\n';
    }
}

void write_boxplot_data(const std::vector<RunRecord>& records, GroupBy group_by,
                        std::ostream& out, char delimiter) {
    std::map<std::string, std::vector<double>> groups;
    for (const RunRecord& r : records) {
        if (!r.diverged) groups[group_by == GroupBy::Setting ? r.setting.key()
                                                             : r.dataset]
                             .push_back(r.accuracy);
    }
    out << "group" << delimiter << "min" << delimiter << "q25" << delimiter << "median"
        << delimiter << "q75" << delimiter << "max" << delimiter << "values" << '\n';
    for (auto& [key, values] : groups) {
        AggregateStats s = compute_stats(values);
        char buf[32];
        out << key;
        for (double v : {s.min, s.q25, s.median, s.q75, s.max}) {
            fmt_buf_value(buf, sizeof(buf), v);
            out << delimiter << buf;
        }
        out << delimiter;
        for (size_t i = 0; i < values.size(); ++i) {
            if (i) out << ' ';
            fmt_buf_value(buf, sizeof(buf), values[i]);
            out << buf;
        }
        out << '\n';
    }
}

ReportTable read_report_table(std::istream& in, char delimiter) {
    ReportTable table;
    std::string line;
    if (!std::getline(in, line)) throw FormatError("report input is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header = split_values(line, delimiter);
    if (header.size() < 2) throw FormatError("report input needs a method column");
    table.methods.assign(header.begin() + 1, header.end());
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields = split_values(line, delimiter);
        if (fields.size() != header.size()) {
            throw ShapeError("report row '" + fields.front() + "' has " +
                             std::to_string(fields.size() - 1) + " values, expected " +
                             std::to_string(table.methods.size()));
        }
        std::vector<std::optional<double>> values;
        for (size_t i = 1; i < fields.size(); ++i) {
            if (fields[i].empty() || fields[i] == "-") {
                values.push_back(std::nullopt);
            } else {
                values.push_back(std::stod(fields[i]));
            }
        }
        table.rows.emplace_back(fields[0], std::move(values));
    }
    return table;
}

namespace {

std::string format_cell(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

// per row: 0 = plain, 1 = second best, 2 = best
std::vector<int> row_marks(const std::vector<std::optional<double>>& values) {
    std::vector<double> present;
    for (const auto& v : values) {
        if (v) present.push_back(*v);
    }
    std::vector<int> marks(values.size(), 0);
    if (present.empty()) return marks;
    std::sort(present.begin(), present.end(), std::greater<>());
    double best = present.front();
    std::optional<double> second;
    for (double v : present) {
        if (v < best) {
            second = v;
            break;
        }
    }
    for (size_t i = 0; i < values.size(); ++i) {
        if (!values[i]) continue;
        if (*values[i] == best) {
            marks[i] = 2;
        } else if (second && *values[i] == *second) {
            marks[i] = 1;
        }
    }
    return marks;
}

}  // namespace

std::string report_plain(const ReportTable& table, char delimiter) {
    std::ostringstream out;
    out << "dataset";
    for (const std::string& m : table.methods) out << delimiter << m;
    out << '\n';
    for (const auto& [dataset, values] : table.rows) {
        out << dataset;
        for (const auto& v : values) {
            out << delimiter << (v ? format_cell(*v) : std::string("-"));
        }
        out << '\n';
    }
    return out.str();
}

std::string report_markup(const ReportTable& table) {
    std::ostringstream out;
    out << "| dataset |";
    for (const std::string& m : table.methods) out << ' ' << m << " |";
    out << "\n|---|";
    for (size_t i = 0; i < table.methods.size(); ++i) out << "---|";
    out << '\n';
    for (const auto& [dataset, values] : table.rows) {
        std::vector<int> marks = row_marks(values);
        out << "| " << dataset << " |";
        for (size_t i = 0; i < values.size(); ++i) {
            if (!values[i]) {
                out << " - |";
            } else if (marks[i] == 2) {
                out << " **" << format_cell(*values[i]) << "** |";
            } else if (marks[i] == 1) {
                out << " *" << format_cell(*values[i]) << "* |";
            } else {
                out << ' ' << format_cell(*values[i]) << " |";
            }
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace wildmatch
