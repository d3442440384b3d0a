#pragma once

#include <cstddef>
#include <functional>

namespace mlsmo {

// Process-wide worker count used by CV folds, tuning trials and batch
// evaluation. 1 means everything runs inline on the calling thread.
void set_worker_count(std::size_t workers);
std::size_t worker_count();

// Runs body(i) for i in [0, n). Work is split into contiguous blocks, one per
// worker. Callers write results into slot i so reductions can be done in index
// order afterwards. The first exception thrown by any task is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace mlsmo
