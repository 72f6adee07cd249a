#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "wildmatch/catalog.hpp"

namespace wildmatch {

enum class SplitKind { ClosedSet, OpenSet, DisjointSet, TimeAware };

struct SplitMode {
    SplitKind kind = SplitKind::ClosedSet;
    /// Only meaningful for OpenSet: fraction of test identities that must be
    /// absent from the reference side. Strictly inside (0,1).
    double new_identity_fraction = 0.0;

    static SplitMode closed_set() { return {SplitKind::ClosedSet, 0.0}; }
    static SplitMode open_set(double fraction) { return {SplitKind::OpenSet, fraction}; }
    static SplitMode disjoint_set() { return {SplitKind::DisjointSet, 0.0}; }
    static SplitMode time_aware() { return {SplitKind::TimeAware, 0.0}; }
};

/// Reproducible reference/query assignment. train/test id lists are kept
/// sorted so equal inputs serialize byte-identically.
struct SplitManifest {
    SplitMode mode;
    uint64_t seed = 0;
    double train_ratio = 0.8;
    std::string generator = kGeneratorName;
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
};

/// Deterministic split of a catalog under the given regime.
///   ClosedSet    per identity, ceil(ratio*k) images to train; singleton
///                identities go entirely to train.
///   OpenSet      a seed-chosen subset of identities moves wholly to test so
///                that exactly ceil(fraction * |test identities|) of them are
///                new; the rest split as ClosedSet.
///   DisjointSet  whole identities assigned to one side.
///   TimeAware    whole calendar days assigned to one side, largest first,
///                until the train ratio is reached.
SplitManifest split(const Catalog& catalog, SplitMode mode, double train_ratio,
                    uint64_t seed);

/// Audits a manifest against the catalog. Returns one human-readable string
/// per violated rule; empty means the manifest is valid for its mode.
/// Throws Error if the manifest references an unknown image_id.
std::vector<std::string> verify(const SplitManifest& manifest, const Catalog& catalog);

std::string mode_to_string(const SplitMode& mode);
SplitMode mode_from_string(const std::string& text);

void write_manifest(const SplitManifest& manifest, std::ostream& out);
SplitManifest read_manifest(std::istream& in);

}  // namespace wildmatch
