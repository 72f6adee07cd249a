#include "wildmatch/splitting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace wildmatch {

namespace {

using IdentityGroups = std::vector<std::pair<std::string, std::vector<std::string>>>;

// Identity -> image ids, identities in lexicographic order.
IdentityGroups group_by_identity(const Catalog& catalog) {
    std::map<std::string, std::vector<std::string>> groups;
    for (const ImageRecord& r : catalog.records()) {
        groups[r.identity].push_back(r.image_id);
    }
    return IdentityGroups(groups.begin(), groups.end());
}

size_t train_count_for(double ratio, size_t k) {
    size_t n = static_cast<size_t>(std::ceil(ratio * static_cast<double>(k)));
    return std::min(n, k);
}

void closed_assign(const IdentityGroups& groups, double ratio, Rng& rng,
                   std::vector<std::string>& train, std::vector<std::string>& test) {
    for (const auto& [identity, ids] : groups) {
        std::vector<std::string> shuffled = ids;
        std::sort(shuffled.begin(), shuffled.end());
        rng.shuffle(shuffled);
        size_t n_train = train_count_for(ratio, shuffled.size());
        for (size_t i = 0; i < shuffled.size(); ++i) {
            (i < n_train ? train : test).push_back(shuffled[i]);
        }
    }
}

std::vector<std::string> shuffled_identities(const IdentityGroups& groups, Rng& rng) {
    std::vector<std::string> identities;
    identities.reserve(groups.size());
    for (const auto& [identity, ids] : groups) identities.push_back(identity);
    rng.shuffle(identities);
    return identities;
}

struct OpenSetAttempt {
    std::vector<std::string> train;
    std::vector<std::string> test;
    size_t n_test_identities = 0;
};

OpenSetAttempt open_set_attempt(const IdentityGroups& groups, size_t n_new,
                                double ratio, uint64_t seed) {
    Rng rng(seed);
    std::vector<std::string> order = shuffled_identities(groups, rng);

    std::set<std::string> new_identities(order.begin(), order.begin() + n_new);
    IdentityGroups remainder;
    OpenSetAttempt attempt;
    std::set<std::string> test_identities;
    for (const auto& [identity, ids] : groups) {
        if (new_identities.count(identity)) {
            attempt.test.insert(attempt.test.end(), ids.begin(), ids.end());
            test_identities.insert(identity);
        } else {
            remainder.push_back({identity, ids});
        }
    }
    closed_assign(remainder, ratio, rng, attempt.train, attempt.test);
    for (const auto& [identity, ids] : remainder) {
        if (train_count_for(ratio, ids.size()) < ids.size()) {
            test_identities.insert(identity);
        }
    }
    attempt.n_test_identities = test_identities.size();
    return attempt;
}

size_t required_new(double fraction, size_t n_test_identities) {
    return static_cast<size_t>(
        std::ceil(fraction * static_cast<double>(n_test_identities)));
}

}  // namespace

SplitManifest split(const Catalog& catalog, SplitMode mode, double train_ratio,
                    uint64_t seed) {
    if (catalog.empty()) throw PreconditionError("split: catalog is empty");
    if (!(train_ratio > 0.0 && train_ratio < 1.0)) {
        throw PreconditionError("split: train_ratio must lie strictly in (0,1)");
    }
    if (mode.kind == SplitKind::OpenSet &&
        !(mode.new_identity_fraction > 0.0 && mode.new_identity_fraction < 1.0)) {
        throw PreconditionError(
            "split: open-set new-identity fraction must lie strictly in (0,1)");
    }

    SplitManifest manifest;
    manifest.mode = mode;
    manifest.seed = seed;
    manifest.train_ratio = train_ratio;

    IdentityGroups groups = group_by_identity(catalog);
    Rng rng(seed);

    switch (mode.kind) {
        case SplitKind::ClosedSet: {
            closed_assign(groups, train_ratio, rng, manifest.train_ids,
                          manifest.test_ids);
            break;
        }
        case SplitKind::OpenSet: {
            if (groups.size() < 2) {
                throw InfeasibleSplitError(
                    "open-set split needs at least two identities");
            }
            // The number of wholly-held-out identities must equal
            // ceil(fraction * |test identity set|); the test identity count
            // grows monotonically with it, so a fixed point exists.
            bool found = false;
            for (size_t n_new = 1; n_new < groups.size(); ++n_new) {
                OpenSetAttempt attempt =
                    open_set_attempt(groups, n_new, train_ratio, seed);
                if (required_new(mode.new_identity_fraction,
                                 attempt.n_test_identities) == n_new) {
                    manifest.train_ids = std::move(attempt.train);
                    manifest.test_ids = std::move(attempt.test);
                    found = true;
                    break;
                }
            }
            if (!found) {
                throw InfeasibleSplitError(
                    "open-set split: no feasible count of new identities");
            }
            break;
        }
        case SplitKind::DisjointSet: {
            if (groups.size() < 2) {
                throw InfeasibleSplitError(
                    "disjoint-set split needs at least two identities");
            }
            std::vector<std::string> order = shuffled_identities(groups, rng);
            std::map<std::string, const std::vector<std::string>*> by_identity;
            for (const auto& [identity, ids] : groups) by_identity[identity] = &ids;
            double target = train_ratio * static_cast<double>(catalog.size());
            size_t assigned_train = 0;
            for (const std::string& identity : order) {
                const auto& ids = *by_identity[identity];
                bool to_train = static_cast<double>(assigned_train) < target;
                // keep the query side non-empty
                if (to_train && identity == order.back() && manifest.test_ids.empty()) {
                    to_train = false;
                }
                auto& side = to_train ? manifest.train_ids : manifest.test_ids;
                side.insert(side.end(), ids.begin(), ids.end());
                if (to_train) assigned_train += ids.size();
            }
            break;
        }
        case SplitKind::TimeAware: {
            std::map<long, std::vector<std::string>> by_day;
            for (const ImageRecord& r : catalog.records()) {
                if (!r.timestamp) {
                    throw PreconditionError(
                        "time-aware split: record '" + r.image_id +
                        "' has no timestamp");
                }
                by_day[r.timestamp->day_number()].push_back(r.image_id);
            }
            std::vector<long> periods;
            for (const auto& [day, ids] : by_day) periods.push_back(day);
            rng.shuffle(periods);
            std::stable_sort(periods.begin(), periods.end(),
                             [&](long a, long b) {
                                 return by_day[a].size() > by_day[b].size();
                             });
            double target = train_ratio * static_cast<double>(catalog.size());
            size_t assigned_train = 0;
            for (long day : periods) {
                const auto& ids = by_day[day];
                bool to_train = static_cast<double>(assigned_train) < target;
                auto& side = to_train ? manifest.train_ids : manifest.test_ids;
                side.insert(side.end(), ids.begin(), ids.end());
                if (to_train) assigned_train += ids.size();
            }
            break;
        }
    }

    std::sort(manifest.train_ids.begin(), manifest.train_ids.end());
    std::sort(manifest.test_ids.begin(), manifest.test_ids.end());
    return manifest;
}

std::vector<std::string> verify(const SplitManifest& manifest, const Catalog& catalog) {
    std::vector<std::string> violations;

    std::set<std::string> train(manifest.train_ids.begin(), manifest.train_ids.end());
    std::set<std::string> test(manifest.test_ids.begin(), manifest.test_ids.end());
    for (const std::string& id : train) {
        (void)catalog.at(id);  // throws on unknown ids
        if (test.count(id)) {
            violations.push_back("image '" + id + "' appears on both sides");
        }
    }
    for (const std::string& id : test) (void)catalog.at(id);
    for (const ImageRecord& r : catalog.records()) {
        if (!train.count(r.image_id) && !test.count(r.image_id)) {
            violations.push_back("image '" + r.image_id + "' is unassigned");
        }
    }

    std::set<std::string> train_identities, test_identities;
    for (const std::string& id : train) train_identities.insert(catalog.at(id).identity);
    for (const std::string& id : test) test_identities.insert(catalog.at(id).identity);

    switch (manifest.mode.kind) {
        case SplitKind::ClosedSet: {
            for (const std::string& identity : test_identities) {
                if (!train_identities.count(identity)) {
                    violations.push_back("closed-set: test identity '" + identity +
                                         "' missing from train");
                }
            }
            break;
        }
        case SplitKind::OpenSet: {
            size_t n_new = 0;
            for (const std::string& identity : test_identities) {
                if (!train_identities.count(identity)) ++n_new;
            }
            size_t expected = required_new(manifest.mode.new_identity_fraction,
                                           test_identities.size());
            if (n_new != expected) {
                violations.push_back(
                    "open-set: " + std::to_string(n_new) + " new test identities, expected " +
                    std::to_string(expected));
            }
            break;
        }
        case SplitKind::DisjointSet: {
            for (const std::string& identity : test_identities) {
                if (train_identities.count(identity)) {
                    violations.push_back("disjoint-set: identity '" + identity +
                                         "' appears on both sides");
                }
            }
            break;
        }
        case SplitKind::TimeAware: {
            std::map<long, std::pair<bool, bool>> sides;  // day -> (in train, in test)
            for (const std::string& id : train) {
                const auto& r = catalog.at(id);
                if (r.timestamp) sides[r.timestamp->day_number()].first = true;
            }
            for (const std::string& id : test) {
                const auto& r = catalog.at(id);
                if (r.timestamp) sides[r.timestamp->day_number()].second = true;
            }
            for (const auto& [day, flags] : sides) {
                if (flags.first && flags.second) {
                    violations.push_back("time-aware: day " +
                                         Date::from_day_number(day).to_string() +
                                         " is split across both sides");
                }
            }
            break;
        }
    }
    return violations;
}

std::string mode_to_string(const SplitMode& mode) {
    switch (mode.kind) {
        case SplitKind::ClosedSet:
            return "closed-set";
        case SplitKind::OpenSet: {
            char buf[48];
            std::snprintf(buf, sizeof(buf), "open-set %.17g", mode.new_identity_fraction);
            return buf;
        }
        case SplitKind::DisjointSet:
            return "disjoint-set";
        case SplitKind::TimeAware:
            return "time-aware";
    }
    throw Error("unreachable split mode");
}

SplitMode mode_from_string(const std::string& text) {
    if (text == "closed-set" || text == "closed") return SplitMode::closed_set();
    if (text == "disjoint-set" || text == "disjoint") return SplitMode::disjoint_set();
    if (text == "time-aware" || text == "time") return SplitMode::time_aware();
    if (text.rfind("open-set", 0) == 0) {
        double fraction = 0.0;
        if (std::sscanf(text.c_str(), "open-set %lg", &fraction) == 1) {
            return SplitMode::open_set(fraction);
        }
    }
    throw FormatError("unknown split mode '" + text + "'");
}

void write_manifest(const SplitManifest& manifest, std::ostream& out) {
    char ratio[48];
    std::snprintf(ratio, sizeof(ratio), "%.17g", manifest.train_ratio);
    out << "mode: " << mode_to_string(manifest.mode) << '\n'
        << "seed: " << manifest.seed << '\n'
        << "ratio: " << ratio << '\n'
        << "generator: " << manifest.generator << '\n'
        << "train: " << manifest.train_ids.size() << '\n';
    for (const std::string& id : manifest.train_ids) out << id << '\n';
    out << "test: " << manifest.test_ids.size() << '\n';
    for (const std::string& id : manifest.test_ids) out << id << '\n';
}

SplitManifest read_manifest(std::istream& in) {
    SplitManifest manifest;
    std::string line;
    auto expect = [&](const std::string& key) -> std::string {
        if (!std::getline(in, line) || line.rfind(key, 0) != 0) {
            throw FormatError("manifest: expected '" + key + "' line");
        }
        return line.substr(key.size());
    };
    manifest.mode = mode_from_string(expect("mode: "));
    manifest.seed = std::stoull(expect("seed: "));
    manifest.train_ratio = std::stod(expect("ratio: "));
    manifest.generator = expect("generator: ");
    size_t n_train = std::stoull(expect("train: "));
    manifest.train_ids.reserve(n_train);
    for (size_t i = 0; i < n_train; ++i) {
        if (!std::getline(in, line)) throw FormatError("manifest: truncated train list");
        manifest.train_ids.push_back(line);
    }
    size_t n_test = std::stoull(expect("test: "));
    manifest.test_ids.reserve(n_test);
    for (size_t i = 0; i < n_test; ++i) {
        if (!std::getline(in, line)) throw FormatError("manifest: truncated test list");
        manifest.test_ids.push_back(line);
    }
    return manifest;
}

}  // namespace wildmatch
