#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace gplab {

inline unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// Runs body(state, i) for i in [0, n) on up to `threads` workers. Each worker
// owns one state from make_state(), so FFT plans and scratch buffers are never
// shared. Callers store results by index, which keeps output independent of
// scheduling. The first exception thrown by any worker is rethrown.
template <class MakeState, class Body>
void parallel_for(std::size_t n, unsigned threads, MakeState&& make_state, Body&& body) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        try {
            auto state = make_state();
            for (std::size_t i = next++; i < n; i = next++) body(state, i);
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next = n;
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace gplab
