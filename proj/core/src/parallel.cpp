#include "muse/parallel.hpp"

#include <atomic>
#include <thread>
#include <vector>

namespace muse {

void parallel_for(std::int64_t n, std::int64_t workers,
                  const std::function<void(std::int64_t)>& fn) {
  if (n <= 0) return;
  if (workers <= 1 || n == 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  auto body = [&] {
    for (;;) {
      std::int64_t i = next.fetch_add(1);
      if (i >= n) return;
      fn(i);
    }
  };
  std::vector<std::jthread> pool;
  const std::int64_t count = std::min(workers, n);
  pool.reserve(static_cast<std::size_t>(count));
  for (std::int64_t t = 0; t < count; ++t) pool.emplace_back(body);
}

}  // namespace muse
