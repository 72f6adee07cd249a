#include "wildmatch/catalog.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace wildmatch {

namespace {

std::vector<std::string> split_line(const std::string& line, char delimiter) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, delimiter)) fields.push_back(field);
    if (!line.empty() && line.back() == delimiter) fields.emplace_back();
    return fields;
}

}  // namespace

void Catalog::add(ImageRecord record) {
    if (record.identity.empty()) {
        throw IngestError("record '" + record.image_id + "' has an empty identity");
    }
    auto [it, inserted] = index_.emplace(record.image_id, records_.size());
    if (!inserted) {
        throw IngestError("duplicate image_id '" + record.image_id + "'");
    }
    records_.push_back(std::move(record));
}

const ImageRecord& Catalog::at(const std::string& image_id) const {
    auto it = index_.find(image_id);
    if (it == index_.end()) {
        throw Error("unknown image_id '" + image_id + "'");
    }
    return records_[it->second];
}

Catalog ingest_catalog(std::istream& in, const IngestSchema& schema,
                       const std::string& name) {
    std::string header_line;
    if (!std::getline(in, header_line)) {
        throw IngestError("metadata file is empty");
    }
    if (!header_line.empty() && header_line.back() == '\r') header_line.pop_back();
    std::vector<std::string> header = split_line(header_line, schema.delimiter);

    auto column_of = [&](const std::string& column) -> std::optional<size_t> {
        for (size_t i = 0; i < header.size(); ++i) {
            if (header[i] == column) return i;
        }
        return std::nullopt;
    };
    auto mandatory = [&](const std::string& column) {
        auto idx = column_of(column);
        if (!idx) throw SchemaError("missing mandatory column '" + column + "'");
        return *idx;
    };

    size_t id_col = mandatory(schema.image_id_column);
    size_t identity_col = mandatory(schema.identity_column);
    std::optional<size_t> dataset_col =
        schema.dataset_column ? column_of(*schema.dataset_column) : std::nullopt;
    std::optional<size_t> timestamp_col =
        schema.timestamp_column ? column_of(*schema.timestamp_column) : std::nullopt;
    std::optional<size_t> payload_col =
        schema.payload_column ? column_of(*schema.payload_column) : std::nullopt;

    Catalog catalog(name);
    std::string line;
    size_t line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields = split_line(line, schema.delimiter);
        auto field = [&](size_t col) -> std::string {
            return col < fields.size() ? fields[col] : std::string();
        };

        ImageRecord record;
        record.image_id = field(id_col);
        record.identity = field(identity_col);
        if (record.identity.empty()) {
            throw IngestError("line " + std::to_string(line_number) +
                              ": empty identity for image_id '" + record.image_id + "'");
        }
        if (catalog.contains(record.image_id)) {
            throw IngestError("duplicate image_id '" + record.image_id + "' at line " +
                              std::to_string(line_number));
        }
        if (dataset_col) record.dataset = field(*dataset_col);
        if (timestamp_col) {
            std::string ts = field(*timestamp_col);
            if (!ts.empty()) {
                try {
                    record.timestamp = Date::parse(ts);
                } catch (const FormatError& e) {
                    throw IngestError("line " + std::to_string(line_number) + ": " +
                                      e.what());
                }
            }
        }
        if (payload_col) {
            std::string p = field(*payload_col);
            if (!p.empty()) record.payload_ref = p;
        }
        catalog.add(std::move(record));
    }
    return catalog;
}

Catalog ingest_catalog_file(const std::string& path, const IngestSchema& schema) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open metadata file '" + path + "'");
    return ingest_catalog(in, schema, path);
}

void emit_catalog(const Catalog& catalog, std::ostream& out, char delimiter) {
    out << "image_id" << delimiter << "identity" << delimiter << "dataset" << delimiter
        << "timestamp" << delimiter << "payload_ref" << '\n';
    for (const ImageRecord& r : catalog.records()) {
        out << r.image_id << delimiter << r.identity << delimiter << r.dataset
            << delimiter << (r.timestamp ? r.timestamp->to_string() : std::string())
            << delimiter << (r.payload_ref ? *r.payload_ref : std::string()) << '\n';
    }
}

CatalogStats compute_stats(const Catalog& catalog) {
    if (catalog.empty()) {
        throw PreconditionError("stats: catalog is empty");
    }
    CatalogStats stats;
    stats.n_images = catalog.size();
    stats.has_timestamps = true;
    for (const ImageRecord& r : catalog.records()) {
        ++stats.images_per_identity[r.identity];
        if (!r.timestamp) stats.has_timestamps = false;
    }
    stats.n_identities = stats.images_per_identity.size();
    return stats;
}

}  // namespace wildmatch
