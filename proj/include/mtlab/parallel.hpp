#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace mtlab {

/// Calls f(i) for i in [0, count), strided over `workers` threads. Results
/// must be written to per-index slots so the outcome does not depend on the
/// worker count. The first exception (by worker) is rethrown after joining.
template <class F>
void parallel_for(std::size_t count, int workers, F&& f) {
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)),
                                              std::max<std::size_t>(count, 1));
  if (w == 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(w);
  for (std::size_t k = 0; k < w; ++k)
    pool.emplace_back([&, k] {
      try {
        for (std::size_t i = k; i < count; i += w) f(i);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace mtlab
