#pragma once

#include <cstddef>
#include <functional>

namespace lsfm {

// Process-wide cap on worker threads (CLI --threads). 0 means hardware default.
void set_thread_cap(int threads);
int thread_cap();

// Number of workers parallel_for would use for `count` items.
int worker_count(std::size_t count);

// Runs fn(begin, end) over static contiguous chunks of [0, count).
// Chunk boundaries depend only on `count` and the thread cap, so per-chunk
// accumulators reduced in chunk order give reproducible results.
void parallel_chunks(std::size_t count,
                     const std::function<void(std::size_t, std::size_t, int)>& fn);

// Element-wise convenience wrapper.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace lsfm
