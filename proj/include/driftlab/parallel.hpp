#pragma once

#include <cstdint>
#include <functional>

namespace driftlab {

/// Number of worker threads to use for a request of `threads` (0 = all
/// available hardware threads).
int resolve_threads(int threads) noexcept;

using ProgressFn = std::function<void(std::int64_t done, std::int64_t total)>;

/// Calls body(i) for i in [0, count) on up to `threads` workers. Work items
/// are claimed dynamically; callers write results into per-index slots so
/// the outcome does not depend on scheduling. The first exception thrown by
/// any body is rethrown after all workers stop. `progress`, if set, is
/// called serially after each finished item.
void parallel_for(std::int64_t count, int threads, const std::function<void(std::int64_t)>& body,
                  const ProgressFn& progress = {});

}  // namespace driftlab
