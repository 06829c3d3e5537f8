#ifndef SPLINECNN_PARALLEL_HPP
#define SPLINECNN_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <exception>
#include <span>
#include <thread>
#include <vector>

namespace splinecnn {

/// Splits nodes [0, N) into `workers` contiguous ranges holding roughly equal
/// numbers of edges. `segments` is the CSR origin offset array (size N+1).
inline std::vector<std::size_t> balanced_node_ranges(std::span<const std::size_t> segments, std::size_t workers) {
  const std::size_t n = segments.size() - 1;
  const std::size_t total = segments.back();
  std::vector<std::size_t> bounds{0};
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t goal = total * w / workers;
    auto it = std::lower_bound(segments.begin(), segments.end(), goal);
    bounds.push_back(std::clamp<std::size_t>(static_cast<std::size_t>(it - segments.begin()), bounds.back(), n));
  }
  bounds.push_back(n);
  return bounds;
}

/// Runs fn(worker, begin, end) for each range [bounds[w], bounds[w+1]).
/// Worker 0 runs on the calling thread; exceptions are rethrown after join.
template <class Fn>
void run_ranges(const std::vector<std::size_t>& bounds, Fn&& fn) {
  const std::size_t workers = bounds.size() - 1;
  if (workers <= 1) {
    fn(std::size_t{0}, bounds.front(), bounds.back());
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  threads.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        fn(w, bounds[w], bounds[w + 1]);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  try {
    fn(std::size_t{0}, bounds[0], bounds[1]);
  } catch (...) {
    errors[0] = std::current_exception();
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace splinecnn

#endif  // SPLINECNN_PARALLEL_HPP
