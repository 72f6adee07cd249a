#include "knn_exact.hpp"

namespace wildmatch::detail {

float exact_dot(const float* a, const float* b, size_t d) {
    float acc = 0.0f;
    for (size_t i = 0; i < d; ++i) acc += a[i] * b[i];
    return acc;
}

}  // namespace wildmatch::detail
