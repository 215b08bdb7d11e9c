#pragma once

#include <cstdint>
#include <functional>

namespace muse {

// Runs fn(0..n-1) across up to `workers` threads. Each index must write only
// to its own slot so results are identical for any worker count.
void parallel_for(std::int64_t n, std::int64_t workers,
                  const std::function<void(std::int64_t)>& fn);

}  // namespace muse
