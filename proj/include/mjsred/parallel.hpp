#pragma once

// Deterministic fan-out over independent work items. Results are written by index,
// so the outcome never depends on the thread count.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mjsred {

namespace detail {
inline std::atomic<int>& thread_setting() {
    static std::atomic<int> value{0};
    return value;
}
} // namespace detail

/// 0 means: read MJS_REDUCE_THREADS, else 1.
inline void set_num_threads(int n) { detail::thread_setting().store(std::max(n, 0)); }

inline int num_threads() {
    const int v = detail::thread_setting().load();
    if (v > 0) return v;
    if (const char* env = std::getenv("MJS_REDUCE_THREADS")) {
        const int e = std::atoi(env);
        if (e > 0) return e;
    }
    return 1;
}

/// Calls fn(i) for i in [0, count). The first exception thrown is rethrown on the caller.
template <class Fn>
void parallel_for(int count, Fn&& fn) {
    const int workers = std::min(num_threads(), count);
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace mjsred
