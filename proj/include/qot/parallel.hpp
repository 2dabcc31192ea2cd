#ifndef QOT_PARALLEL_HPP
#define QOT_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace qot {

/// Worker count: hardware concurrency, capped by the QOT_THREADS
/// environment variable when set.
unsigned worker_count();

/// Runs body(k) for k in [0, n). Each index is handled by exactly one
/// worker, so results do not depend on the worker count. Small workloads
/// (n * cost_hint below a fixed grain) run inline.
void parallel_for(std::size_t n, std::size_t cost_hint, const std::function<void(std::size_t)>& body);

}  // namespace qot

#endif  // QOT_PARALLEL_HPP
