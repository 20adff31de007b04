#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace mrf {

/// Caps every OpenMP region in the library. n <= 0 restores the runtime default.
void set_thread_count(int n);
int thread_count();

/// Runs body(i) for i in [0, n) across worker threads. Each index is
/// handled exactly once; if any invocation throws, the exception from the
/// lowest failing index is rethrown after the loop completes.
void parallel_for(std::ptrdiff_t n, const std::function<void(std::ptrdiff_t)> &body);

} // namespace mrf
