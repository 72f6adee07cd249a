#include "wildmatch/simgen.hpp"

#include <cmath>
#include <cstdio>

namespace wildmatch {

namespace {

std::string identity_name(size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "id%03zu", i);
    return buf;
}

std::string image_name(const std::string& tag, size_t i, size_t j) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s-id%03zu-img%03zu", tag.c_str(), i, j);
    return buf;
}

double noise_sigma(double concentration) {
    if (std::isinf(concentration)) return 0.0;
    return 1.0 / std::sqrt(concentration);
}

void unit_gaussian(Rng& rng, std::vector<double>& v) {
    double norm_sq = 0.0;
    for (double& x : v) {
        x = rng.gaussian();
        norm_sq += x * x;
    }
    double norm = std::sqrt(norm_sq);
    if (norm == 0.0) norm = 1.0;  // astronomically unlikely
    for (double& x : v) x /= norm;
}

ImageRecord make_record(const SimSpec& spec, size_t i, size_t j) {
    ImageRecord r;
    r.image_id = image_name(spec.dataset_tag, i, j);
    r.identity = identity_name(i);
    r.dataset = spec.dataset_tag;
    if (spec.n_periods > 0) {
        r.timestamp = Date::from_day_number(Date{2020, 1, 1}.day_number() +
                                            static_cast<long>(j % spec.n_periods));
    }
    return r;
}

}  // namespace

void SimSpec::validate() const {
    if (n_identities == 0 || images_per_identity == 0 || dim == 0) {
        throw PreconditionError("simgen: counts and dim must be >= 1");
    }
    if (!(concentration > 0.0)) {
        throw PreconditionError("simgen: concentration must be positive");
    }
}

std::pair<Catalog, EmbeddingMatrix> gen_embeddings(const SimSpec& spec) {
    spec.validate();
    const double sigma = noise_sigma(spec.concentration);
    Catalog catalog(spec.dataset_tag);
    EmbeddingMatrix m(spec.n_identities * spec.images_per_identity, spec.dim);

    std::vector<double> mean(spec.dim), sample(spec.dim);
    size_t row = 0;
    for (size_t i = 0; i < spec.n_identities; ++i) {
        Rng rng(Rng::mix(spec.seed, i));  // one stream per identity
        unit_gaussian(rng, mean);
        for (size_t j = 0; j < spec.images_per_identity; ++j, ++row) {
            double norm_sq = 0.0;
            for (size_t k = 0; k < spec.dim; ++k) {
                sample[k] = mean[k] + sigma * rng.gaussian();
                norm_sq += sample[k] * sample[k];
            }
            double norm = std::sqrt(norm_sq);
            if (norm == 0.0) norm = 1.0;
            auto out = m.row(row);
            for (size_t k = 0; k < spec.dim; ++k) {
                out[k] = static_cast<float>(sample[k] / norm);
            }
            ImageRecord r = make_record(spec, i, j);
            m.row_ids()[row] = r.image_id;
            catalog.add(std::move(r));
        }
    }
    m.set_normalized(true);
    return {std::move(catalog), std::move(m)};
}

std::pair<Catalog, std::vector<DescriptorSet>> gen_descriptors(
    const SimSpec& spec, size_t descriptors_per_image) {
    spec.validate();
    if (descriptors_per_image == 0) {
        throw PreconditionError("simgen: descriptors_per_image must be >= 1");
    }
    const double sigma = noise_sigma(spec.concentration);
    Catalog catalog(spec.dataset_tag);
    std::vector<DescriptorSet> sets;
    sets.reserve(spec.n_identities * spec.images_per_identity);

    for (size_t i = 0; i < spec.n_identities; ++i) {
        Rng rng(Rng::mix(spec.seed ^ 0x5eedull, i));
        // Prototype bank, spread wide so banks of different identities are
        // far apart relative to the noise.
        std::vector<double> bank(descriptors_per_image * spec.dim);
        for (double& v : bank) v = rng.gaussian() * 10.0;

        for (size_t j = 0; j < spec.images_per_identity; ++j) {
            DescriptorSet s;
            s.dim = spec.dim;
            s.count = descriptors_per_image;
            s.data.resize(bank.size());
            for (size_t k = 0; k < bank.size(); ++k) {
                s.data[k] = static_cast<float>(bank[k] + sigma * rng.gaussian());
            }
            ImageRecord r = make_record(spec, i, j);
            s.image_id = r.image_id;
            catalog.add(std::move(r));
            sets.push_back(std::move(s));
        }
    }
    return {std::move(catalog), std::move(sets)};
}

}  // namespace wildmatch
