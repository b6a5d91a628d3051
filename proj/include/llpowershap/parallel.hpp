#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace llps {

inline unsigned thread_count_from_env() {
    if (const char* s = std::getenv("LLPOWERSHAP_THREADS")) {
        int v = std::atoi(s);
        if (v > 0) return static_cast<unsigned>(v);
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1u : hc;
}

inline unsigned resolve_threads(unsigned requested) {
    return requested > 0 ? requested : thread_count_from_env();
}

// Runs fn(begin, end) over disjoint index ranges handed out dynamically in
// small blocks, so uneven work items balance across threads. Work items must
// write only to their own slots; results are then independent of scheduling.
template <typename Fn>
void parallel_ranges(std::size_t n, unsigned threads, Fn&& fn) {
    threads = std::max<unsigned>(1, threads);
    if (n == 0) return;
    std::size_t workers = std::min<std::size_t>(threads, n);
    if (workers <= 1) {
        fn(std::size_t{0}, n);
        return;
    }
    const std::size_t block = std::max<std::size_t>(1, n / (workers * 16));
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
        pool.emplace_back([&fn, &first_error, &error_mutex, &next, n, block] {
            try {
                for (;;) {
                    std::size_t begin = next.fetch_add(block);
                    if (begin >= n) break;
                    fn(begin, std::min(n, begin + block));
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace llps
