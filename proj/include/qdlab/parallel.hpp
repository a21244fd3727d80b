#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace qdlab {

// Global worker count for the few data-parallel loops.  Every loop hands out
// fixed index slabs, so results are identical for any worker count.
int thread_count();
void set_thread_count(int n);

// Runs fn(begin, end) over a partition of [0, n).
inline void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
    const int workers = std::min<std::int64_t>(thread_count(), std::max<std::int64_t>(n, 1));
    if (workers <= 1 || n < 4096) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::int64_t chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        std::int64_t lo = w * chunk;
        std::int64_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back(fn, lo, hi);
    }
    for (auto& t : pool) t.join();
}

}  // namespace qdlab
