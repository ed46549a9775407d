#include "localsfm/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace lsfm {

namespace {
std::atomic<int> g_thread_cap{0};
}

void set_thread_cap(int threads) { g_thread_cap.store(threads < 0 ? 0 : threads); }

int thread_cap() {
  int cap = g_thread_cap.load();
  if (cap > 0) return cap;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

int worker_count(std::size_t count) {
  if (count == 0) return 1;
  return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(thread_cap()), count));
}

void parallel_chunks(std::size_t count,
                     const std::function<void(std::size_t, std::size_t, int)>& fn) {
  if (count == 0) return;
  const int workers = worker_count(count);
  if (workers == 1) {
    fn(0, count, 0);
    return;
  }
  const std::size_t chunk = (count + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const std::size_t begin = static_cast<std::size_t>(w) * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end, w] { fn(begin, end, w); });
  }
  for (auto& t : pool) t.join();
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  parallel_chunks(count, [&fn](std::size_t begin, std::size_t end, int) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
  });
}

}  // namespace lsfm
