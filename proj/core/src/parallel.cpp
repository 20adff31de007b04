#include "mrf/parallel.hpp"

#include <limits>
#include <mutex>

#include <omp.h>

namespace mrf {

namespace {
int default_threads = 0;
}

void set_thread_count(int n) {
    if (default_threads == 0)
        default_threads = omp_get_max_threads();
    omp_set_num_threads(n > 0 ? n : default_threads);
}

int thread_count() { return omp_get_max_threads(); }

void parallel_for(std::ptrdiff_t n, const std::function<void(std::ptrdiff_t)> &body) {
    std::mutex guard;
    std::ptrdiff_t failed_at = std::numeric_limits<std::ptrdiff_t>::max();
    std::exception_ptr failure;

#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            body(i);
        } catch (...) {
            std::lock_guard lock(guard);
            if (i < failed_at) {
                failed_at = i;
                failure = std::current_exception();
            }
        }
    }
    if (failure)
        std::rethrow_exception(failure);
}

} // namespace mrf
