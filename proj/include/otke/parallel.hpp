#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace otke {

// Worker cap shared by batched operations. Results never depend on it: every
// parallel loop writes disjoint per-index slots.
inline std::atomic<int>& max_threads_slot() {
    static std::atomic<int> value{0};  // 0 = unset, resolve lazily
    return value;
}

inline void set_max_threads(int n) { max_threads_slot() = n < 1 ? 1 : n; }

inline int max_threads() {
    int n = max_threads_slot();
    if (n > 0) return n;
    if (const char* env = std::getenv("OTKE_THREADS")) {
        const int parsed = std::atoi(env);
        if (parsed > 0) return parsed;
    }
    return 1;
}

template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
    const int workers = static_cast<int>(std::min<std::size_t>(max_threads(), count ? count : 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_lock;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            try {
                for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> hold(error_lock);
                if (!error) error = std::current_exception();
                next = count;  // stop handing out work
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace otke
