#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wildmatch/common.hpp"

namespace wildmatch {

/// Variable-count fixed-width local descriptors for one image.
struct DescriptorSet {
    std::string image_id;
    size_t count = 0;  // K, may be zero
    size_t dim = 0;    // D, shared across a collection
    std::vector<float> data;  // K x D row-major

    std::span<const float> descriptor(size_t i) const {
        return {data.data() + i * dim, dim};
    }
};

/// "WDDS" container: magic, version u16, D u32, image count u64; per image a
/// length-prefixed (u32) image_id, K u32, K*D little-endian f32.
void write_descriptors(const std::vector<DescriptorSet>& sets, const std::string& path);
std::vector<DescriptorSet> read_descriptors(const std::string& path);

}  // namespace wildmatch
