#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <utility>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace mfcn {

// Global worker count. 1 selects the serial reference path; anything larger
// runs the OpenMP kernels. Outputs are identical either way: every loop body
// writes only to its own slot and reductions happen afterwards in index order.
int max_threads();
void set_max_threads(int t);

namespace detail {
inline int& thread_knob() {
    static int t = 0;  // 0 = hardware default
    return t;
}
}  // namespace detail

inline int max_threads() {
#if defined(_OPENMP)
    int t = detail::thread_knob();
    return t > 0 ? t : omp_get_max_threads();
#else
    return 1;
#endif
}

inline void set_max_threads(int t) { detail::thread_knob() = t; }

// Serial reference loop. Kept separate so tests and the benchmark can compare
// it against the OpenMP path directly.
template <class F>
void serial_for(std::int64_t begin, std::int64_t end, F&& body) {
    for (std::int64_t i = begin; i < end; ++i) body(i);
}

// Parallel loop over [begin, end). Exceptions from the body are captured and
// the first one is rethrown after the loop joins.
template <class F>
void parallel_for(std::int64_t begin, std::int64_t end, F&& body) {
    const int threads = max_threads();
    if (threads <= 1 || end - begin <= 1) {
        serial_for(begin, end, body);
        return;
    }
#if defined(_OPENMP)
    std::exception_ptr first_error = nullptr;
    std::mutex error_mutex;
    std::atomic<bool> failed{false};
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (std::int64_t i = begin; i < end; ++i) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            body(i);
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            failed.store(true, std::memory_order_relaxed);
        }
    }
    if (first_error) std::rethrow_exception(first_error);
#else
    serial_for(begin, end, body);
#endif
}

}  // namespace mfcn
