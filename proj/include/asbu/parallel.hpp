#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace asbu {

/// Worker count for batch-parallel loops. Honors ASBU_THREADS when set;
/// value 1 disables threading entirely.
inline int worker_count() {
    if (const char* env = std::getenv("ASBU_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(i) for i in [0, n) split into contiguous chunks, one per worker.
/// Each index is processed by exactly one thread in ascending order inside its
/// chunk, so results are bitwise identical to the serial loop as long as the
/// iterations write to disjoint locations.
inline void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
    int workers = worker_count();
    if (workers <= 1 || n <= 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    if (workers > n) workers = static_cast<int>(n);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    std::int64_t chunk = (n + workers - 1) / workers;
    for (int t = 0; t < workers; ++t) {
        std::int64_t lo = t * chunk;
        std::int64_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::int64_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace asbu
