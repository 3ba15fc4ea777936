#pragma once

#include <cstddef>
#include <functional>

namespace lrcs {

/// Process-wide bound on internal parallelism. 0 resets to the default
/// (LRCS_CDTI_THREADS if set, else hardware concurrency).
void set_thread_count(std::size_t n);
std::size_t thread_count();

/// Runs body(i) for i in [0, n). Each index is handled by exactly one worker,
/// so bodies writing to disjoint outputs stay deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace lrcs
