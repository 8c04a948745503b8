#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace rp4bp {

/// Index-parallel loop over [0, n); results must be written by index so the
/// merge is deterministic regardless of scheduling.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, unsigned threads = 0) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, n == 0 ? 1 : static_cast<unsigned>(n));
    if (threads <= 1 || n < 4) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace rp4bp
