#pragma once

#include <cstdint>
#include <functional>

namespace voxelpipe {

// Process-wide cap on worker threads (CLI --threads). 0 = hardware default.
void set_max_threads(int n);
int max_threads();

// Static partition of [0, n) across workers. Each index is handled by exactly
// one worker, so any body with disjoint writes produces results independent of
// the thread count.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& body);

}  // namespace voxelpipe
