#pragma once

// Deterministic index-space parallel_for. Worker count is capped by the
// FILIPPOV_THREADS environment variable (default: hardware concurrency).
// Results must be written to per-index slots so the output is independent of
// scheduling.

#include <cstddef>
#include <functional>

namespace filippov {

int worker_count();

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace filippov
