#pragma once

#include <cstddef>
#include <functional>

namespace upisp {

// Runs fn(i) for i in [0, n) on up to `workers` threads (0 = hardware
// concurrency). Indices are split into contiguous blocks; any exception is
// rethrown on the calling thread after all workers join. Callers own
// determinism: write results into per-index slots and reduce afterwards.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  unsigned workers = 0);

unsigned default_workers() noexcept;

}  // namespace upisp
