#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace capmin {

/// Runs work(index, worker) for index in [0, count) on up to `workers`
/// threads pulling indices from a shared counter. Caller is responsible for
/// making concurrent work items independent; worker ids are dense in
/// [0, workers) so callers can hand each worker its own scratch.
inline void parallel_for_indexed(int count, int workers,
                                 const std::function<void(int, int)>& work) {
    if (workers <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) work(i, 0);
        return;
    }
    if (workers > count) workers = count;
    std::atomic<int> next{0};
    auto body = [&](int w) {
        for (;;) {
            int i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= count) break;
            work(i, w);
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (int w = 1; w < workers; ++w) pool.emplace_back(body, w);
    body(0);
}

inline int resolve_threads(int threads) {
    if (threads > 0) return threads;
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

} // namespace capmin
