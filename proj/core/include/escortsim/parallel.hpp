#pragma once

#include <cstddef>
#include <functional>

namespace escortsim {

/// Worker count: hardware concurrency, capped by ESCORTSIM_THREADS if set.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) on up to worker_count() threads. Exceptions are
/// rethrown on the calling thread (lowest failing index wins).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace escortsim
