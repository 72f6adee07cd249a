// Reference-order float dot product. Lives in its own translation unit so it
// is never compiled with -ffast-math: the strict left-to-right accumulation is
// the canonical score definition that re-ranking in knn.cpp relies on.
#pragma once

#include <cstddef>

namespace wildmatch::detail {

float exact_dot(const float* a, const float* b, size_t d);

}  // namespace wildmatch::detail
