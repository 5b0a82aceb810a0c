#pragma once

#include <cstddef>
#include <functional>

namespace mtpr {

/// Worker count from MTPR_THREADS (0 or unset = hardware concurrency).
unsigned thread_count();

/// Runs body(i) for every i in [begin, end), split into contiguous chunks
/// across thread_count() workers. Each index is visited exactly once, so a
/// body that writes only to slot i produces the same result for any worker
/// count. The first exception thrown by a worker is rethrown.
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t)>& body);

}  // namespace mtpr
