#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "wildmatch/catalog.hpp"
#include "wildmatch/descriptors.hpp"
#include "wildmatch/embedding.hpp"

namespace wildmatch {

/// Synthetic identity-clustered data. Noise scale is 1/sqrt(concentration);
/// an infinite concentration produces exact copies of the identity mean.
struct SimSpec {
    size_t n_identities = 10;
    size_t images_per_identity = 20;
    size_t dim = 32;
    double concentration = 50.0;
    uint64_t seed = 0;
    /// When > 0, image j of every identity is stamped with day (j mod n_periods)
    /// counted from 2020-01-01, giving TimeAware splits something to group.
    size_t n_periods = 0;
    std::string dataset_tag = "sim";

    void validate() const;
};

/// Unit-norm embeddings clustered around one random mean direction per
/// identity. Deterministic for a fixed seed, independent of thread count.
std::pair<Catalog, EmbeddingMatrix> gen_embeddings(const SimSpec& spec);

/// Per identity a bank of prototype descriptors; every image carries a noisy
/// copy of the bank. Same determinism contract as gen_embeddings.
std::pair<Catalog, std::vector<DescriptorSet>> gen_descriptors(
    const SimSpec& spec, size_t descriptors_per_image);

}  // namespace wildmatch
