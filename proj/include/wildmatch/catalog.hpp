#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "wildmatch/common.hpp"

namespace wildmatch {

/// One image's metadata. The image payload itself (pixels, embeddings,
/// descriptors) lives elsewhere; payload_ref optionally points at it.
struct ImageRecord {
    std::string image_id;
    std::string identity;
    std::string dataset;
    std::optional<Date> timestamp;
    std::optional<std::string> payload_ref;

    bool operator==(const ImageRecord&) const = default;
};

/// Ordered, duplicate-free collection of ImageRecords. Immutable once built;
/// safe to share across threads.
class Catalog {
public:
    Catalog() = default;
    explicit Catalog(std::string name) : name_(std::move(name)) {}

    /// Throws IngestError on duplicate image_id or empty identity.
    void add(ImageRecord record);

    const std::vector<ImageRecord>& records() const { return records_; }
    const std::string& name() const { return name_; }
    size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    bool contains(const std::string& image_id) const {
        return index_.count(image_id) > 0;
    }
    const ImageRecord& at(const std::string& image_id) const;

    bool operator==(const Catalog& other) const {
        return records_ == other.records_;
    }

private:
    std::string name_;
    std::vector<ImageRecord> records_;
    std::unordered_map<std::string, size_t> index_;
};

struct CatalogStats {
    size_t n_images = 0;
    size_t n_identities = 0;
    bool has_timestamps = false;
    std::map<std::string, size_t> images_per_identity;
};

/// Maps the file's column names onto the record fields. image_id and
/// identity are mandatory; the rest are optional.
struct IngestSchema {
    std::string image_id_column = "image_id";
    std::string identity_column = "identity";
    std::optional<std::string> dataset_column = std::string("dataset");
    std::optional<std::string> timestamp_column = std::string("timestamp");
    std::optional<std::string> payload_column = std::string("payload_ref");
    char delimiter = ',';
};

/// Reads a delimiter-separated metadata file with a header row.
/// Fields may not contain the delimiter; no quoting is supported.
Catalog ingest_catalog(std::istream& in, const IngestSchema& schema,
                       const std::string& name = "");
Catalog ingest_catalog_file(const std::string& path, const IngestSchema& schema);

/// Canonical emitter; ingest(emit(c)) == c with the default schema.
void emit_catalog(const Catalog& catalog, std::ostream& out, char delimiter = ',');

/// Throws PreconditionError on an empty catalog.
CatalogStats compute_stats(const Catalog& catalog);

}  // namespace wildmatch
