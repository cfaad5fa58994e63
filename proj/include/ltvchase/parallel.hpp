#pragma once

#include <cstddef>
#include <functional>

namespace ltvchase {

inline constexpr const char* kWorkerEnvVar = "LTVCHASE_WORKERS";

// Hardware concurrency, capped by LTVCHASE_WORKERS when it holds a positive
// integer. Always >= 1.
int default_worker_count();

// Runs fn(i) for i in [0, count) on up to `workers` threads (workers <= 0
// means default_worker_count()). Indices are claimed dynamically; callers
// write results into per-index slots so the outcome is order independent.
// The first exception thrown by any fn is rethrown after all threads join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn, int workers = 0);

}  // namespace ltvchase
