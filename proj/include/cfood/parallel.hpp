#pragma once

#include <cstdint>
#include <functional>

namespace cfood {

/// Worker count to use: `requested` if positive, else CF_OOD_THREADS, else the
/// hardware concurrency.
int resolve_threads(int requested);

/// Runs body(i) for i in [0, n) over `threads` workers using contiguous static
/// chunks. body must only write to slots owned by i. The first exception (by
/// index) is rethrown after all workers join.
void parallel_for(std::int64_t n, int threads, const std::function<void(std::int64_t)>& body);

} // namespace cfood
