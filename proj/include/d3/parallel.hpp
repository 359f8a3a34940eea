#pragma once

#include <cstdint>
#include <exception>
#include <type_traits>
#include <utility>

namespace d3 {

// Global worker cap, set once by the CLI (--threads / D3_THREADS). Defaults
// to 1 so every run is serial unless parallelism is requested explicitly.
void set_threads(int n);
int threads();
int hardware_threads();
// --threads value if > 0, else D3_THREADS, else 1.
int resolve_threads(int requested);

namespace detail {

template <typename F>
void run_serial(std::int64_t n, F&& fn) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
}

void omp_run(std::int64_t n, int nthreads, void (*trampoline)(void*, std::int64_t), void* ctx);

template <typename F>
void run_omp(std::int64_t n, int nthreads, F&& fn) {
    using Fn = std::remove_reference_t<F>;
    auto call = [](void* ctx, std::int64_t i) { (*static_cast<Fn*>(ctx))(i); };
    omp_run(n, nthreads, call, &fn);
}

}  // namespace detail

// Data-parallel map over [0, n). Iterations must be independent; callers keep
// results deterministic by writing into per-index slots and reducing in index
// order afterwards, so serial and parallel execution agree bit for bit.
template <typename F>
void parallel_for(std::int64_t n, F&& fn) {
    const int t = threads();
    if (t <= 1 || n < 2)
        detail::run_serial(n, std::forward<F>(fn));
    else
        detail::run_omp(n, t, std::forward<F>(fn));
}

// Explicit-engine variants, used by the kernel-equivalence tests and the
// benchmark that compares the serial reference against the OpenMP path.
template <typename F>
void parallel_for_serial(std::int64_t n, F&& fn) {
    detail::run_serial(n, std::forward<F>(fn));
}

template <typename F>
void parallel_for_omp(std::int64_t n, int nthreads, F&& fn) {
    detail::run_omp(n, nthreads, std::forward<F>(fn));
}

}  // namespace d3
