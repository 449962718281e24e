#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace bplab {

// Worker count: BPLB_THREADS caps it, default = hardware concurrency.
inline int worker_count() {
    unsigned hw = std::thread::hardware_concurrency();
    int n = hw == 0 ? 1 : static_cast<int>(hw);
    if (const char* env = std::getenv("BPLB_THREADS")) {
        int cap = std::atoi(env);
        if (cap >= 1 && cap < n) { n = cap; }
        if (cap >= 1 && n < 1) { n = cap; }
    }
    return n < 1 ? 1 : n;
}

// Runs fn(i) for i in [0, jobs). Each job must be independent; callers are
// responsible for merging results in index order so that the output does not
// depend on the worker count.
inline void parallel_for(int jobs, const std::function<void(int)>& fn, int max_workers = 0) {
    int workers = worker_count();
    if (max_workers > 0 && max_workers < workers) { workers = max_workers; }
    if (workers > jobs) { workers = jobs; }
    if (workers <= 1) {
        for (int i = 0; i < jobs; ++i) { fn(i); }
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex err_mu;
    auto body = [&] {
        for (;;) {
            int i = next.fetch_add(1);
            if (i >= jobs) { return; }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!first_error) { first_error = std::current_exception(); }
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) { pool.emplace_back(body); }
    for (auto& t : pool) { t.join(); }
    if (first_error) { std::rethrow_exception(first_error); }
}

} // namespace bplab
