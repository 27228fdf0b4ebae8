#pragma once

#include <cstddef>
#include <functional>

namespace bmt {

// Global worker cap for parallel_for. 0 = hardware concurrency.
void set_max_threads(unsigned n);
unsigned max_threads();

// Runs fn(i) for i in [0, n). Work items must be independent; callers that
// need deterministic aggregation write to per-index slots and combine
// sequentially afterwards. Falls back to a serial loop when the cap is 1 or
// n is small.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace bmt
