// Deterministic task-parallel loop.  Tasks write to disjoint output slots and
// every random decision is keyed by task index, so results do not depend on
// the worker count.
#ifndef PAS_PARALLEL_HPP
#define PAS_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace pas {

inline unsigned default_threads() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

template <class Fn>
void parallel_for(std::size_t n_tasks, unsigned threads, Fn&& fn) {
    if (n_tasks == 0) return;
    unsigned workers = std::min<std::size_t>(threads == 0 ? 1 : threads, n_tasks);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n_tasks) return;
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace pas

#endif
