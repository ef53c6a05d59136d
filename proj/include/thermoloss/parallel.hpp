#pragma once

#include <cstddef>
#include <functional>

namespace thermoloss {

// Worker cap: THERMOLOSS_THREADS if set to a positive integer, otherwise the
// hardware concurrency (at least 1).
std::size_t max_threads();

// Runs fn(i) for i in [0, n). Each index is handled by exactly one worker, so
// callers writing to slot i get results independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace thermoloss
