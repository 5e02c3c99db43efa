#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace splatedit {

/// Process-wide worker count for parallel loops. Defaults to the hardware
/// concurrency; tests override it to check thread-count independence.
int thread_count();
void set_thread_count(int n);

/// Runs fn(i) for i in [0, n). Work is split into contiguous chunks, one per
/// worker. Writers must touch disjoint state per index; reductions that need
/// a deterministic order belong in the caller (see parallel_chunks).
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const int workers = std::min<std::size_t>(std::max(thread_count(), 1), n == 0 ? 1 : n);
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t per = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const std::size_t lo = std::size_t(w) * per;
        const std::size_t hi = std::min(n, lo + per);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

/// Fixed-size chunking that does NOT depend on the worker count: fn(c, lo, hi)
/// is invoked for chunk c covering [lo, hi). Per-chunk partial results reduced
/// in chunk order give results independent of the number of threads.
template <typename Fn>
void parallel_chunks(std::size_t n, std::size_t chunk_size, Fn&& fn) {
    const std::size_t chunks = n == 0 ? 0 : (n + chunk_size - 1) / chunk_size;
    parallel_for(chunks, [&](std::size_t c) {
        const std::size_t lo = c * chunk_size;
        const std::size_t hi = std::min(n, lo + chunk_size);
        fn(c, lo, hi);
    });
}

inline std::size_t chunk_count(std::size_t n, std::size_t chunk_size) {
    return n == 0 ? 0 : (n + chunk_size - 1) / chunk_size;
}

}  // namespace splatedit
