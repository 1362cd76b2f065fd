#pragma once

#include <cstddef>
#include <functional>

namespace rgbsde {

/// Number of worker threads: RGBSDE_THREADS (at most 256) when set, else the
/// hardware concurrency.
std::size_t worker_count();

/// Runs body(begin, end) over a partition of [0, count). The partition
/// depends only on `count` and `grain`, never on the worker count, so any
/// per-chunk result is reproducible.
void parallel_for(std::size_t count, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace rgbsde
