#include "adgp/common.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace adgp {

void parallel_for(Index n, int threads, const std::function<void(Index)>& body) {
  if (threads <= 1 || n <= 1) {
    for (Index i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<Index> next{0};
  const auto worker = [&] {
    for (Index i = next++; i < n; i = next++) body(i);
  };
  std::vector<std::jthread> pool;
  const int count = static_cast<int>(std::min<Index>(threads, n));
  pool.reserve(count - 1);
  for (int t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
}

}  // namespace adgp
