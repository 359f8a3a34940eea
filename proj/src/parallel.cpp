#include "d3/parallel.hpp"

#include <omp.h>

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>

namespace d3 {

namespace {
int g_threads = 1;
}

void set_threads(int n) { g_threads = n < 1 ? 1 : n; }

int threads() { return g_threads; }

int hardware_threads() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("D3_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

namespace detail {

void omp_run(std::int64_t n, int nthreads, void (*trampoline)(void*, std::int64_t), void* ctx) {
    std::exception_ptr first_error;
    std::atomic<bool> failed{false};
#pragma omp parallel for schedule(static) num_threads(nthreads)
    for (std::int64_t i = 0; i < n; ++i) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            trampoline(ctx, i);
        } catch (...) {
#pragma omp critical(d3_parallel_error)
            {
                if (!first_error) first_error = std::current_exception();
            }
            failed.store(true, std::memory_order_relaxed);
        }
    }
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

}  // namespace d3
