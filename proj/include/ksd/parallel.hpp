#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace ksd {

/// Name of the environment variable holding the worker budget.
inline constexpr const char *kWorkerBudgetEnv = "KSD_NUM_THREADS";

/// Worker budget from KSD_NUM_THREADS; unset or invalid means hardware concurrency.
inline unsigned worker_budget() {
    if (const char *env = std::getenv(kWorkerBudgetEnv)) {
        try {
            const long v = std::stol(env);
            if (v >= 1) { return static_cast<unsigned>(v); }
        } catch (...) {}
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace detail {
inline thread_local bool in_parallel_region = false;
}

/// Runs body(i) for i in [0, count) on up to worker_budget() threads.
/// Nested calls from inside a worker run serially. The first exception thrown is rethrown.
template<class Body>
void parallel_for(std::size_t count, Body &&body) {
    const unsigned workers = detail::in_parallel_region
                                 ? 1u
                                 : static_cast<unsigned>(std::min<std::size_t>(worker_budget(), count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) { body(i); }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto run = [&] {
        detail::in_parallel_region = true;
        for (std::size_t i; (i = next.fetch_add(1)) < count;) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) { error = std::current_exception(); }
                next.store(count);
            }
        }
        detail::in_parallel_region = false;
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (unsigned t = 1; t < workers; ++t) { pool.emplace_back(run); }
    run();
    pool.clear();
    if (error) { std::rethrow_exception(error); }
}

}  // namespace ksd
