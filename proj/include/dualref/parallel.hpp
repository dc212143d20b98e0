#pragma once

#include <cstddef>
#include <functional>

namespace dualref {

/// Caps the number of worker threads used by compute kernels (>= 1).
void set_max_threads(int threads);
int max_threads();

/// Runs body(begin, end) over disjoint chunks of [0, n). Chunks never overlap,
/// so kernels that write only their own rows stay deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace dualref
