#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace noems {

/// Runs body(i) for i in [0, n) on up to `jobs` threads. Work is claimed in
/// index order; the first exception (lowest index) is rethrown after all
/// workers finish. Results must be written into per-index slots by `body`.
template <class Body>
void parallel_for(std::size_t n, int jobs, Body&& body) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::mutex lock;
    std::size_t next = 0;
    std::size_t failed_at = n;
    std::exception_ptr failure;
    auto worker = [&] {
        while (true) {
            std::size_t i;
            {
                std::lock_guard guard(lock);
                if (next >= n) return;
                i = next++;
            }
            try {
                body(i);
            } catch (...) {
                std::lock_guard guard(lock);
                if (i < failed_at) {
                    failed_at = i;
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace noems
