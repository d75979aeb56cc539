#include "attnmask/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace attnmask {

namespace {

std::atomic<unsigned> g_threads{1};

}  // namespace

void set_thread_count(unsigned count) {
    if (count == 0) count = std::max(1u, std::thread::hardware_concurrency());
    g_threads.store(count);
}

unsigned thread_count() { return g_threads.load(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body, std::size_t grain) {
    if (n == 0) return;
    const std::size_t workers =
        std::min<std::size_t>(thread_count(), std::max<std::size_t>(1, n / std::max<std::size_t>(1, grain)));
    if (workers <= 1) {
        body(0, n);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] {
            try {
                body(begin, end);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace attnmask
