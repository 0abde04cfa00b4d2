#pragma once

#include <Eigen/Core>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace medgmm {

// Runs f(i) for i in [0, count) across the given number of threads. Jobs must
// write only to their own index; callers aggregate in index order afterwards,
// so the result is independent of scheduling. The first escaped exception is
// rethrown on the caller thread.
template <typename F>
void parallel_for_indexed(Eigen::Index count, int threads, const F& f) {
    if (threads <= 1 || count <= 1) {
        for (Eigen::Index i = 0; i < count; ++i) f(i);
        return;
    }
    const int workers = static_cast<int>(std::min<Eigen::Index>(threads, count));
    std::atomic<Eigen::Index> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const Eigen::Index i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace medgmm
