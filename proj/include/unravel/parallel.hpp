#ifndef UNRAVEL_PARALLEL_HPP_
#define UNRAVEL_PARALLEL_HPP_

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace unravel {

// UNRAVEL_THREADS if set and positive, hardware concurrency otherwise.
int worker_count();

// Runs body(b) for b in [0, n_blocks) on up to `workers` threads. The first
// exception by block index is rethrown.
template <typename Body>
void for_each_block(std::size_t n_blocks, int workers, Body&& body) {
  std::vector<std::exception_ptr> errors(n_blocks);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t b; (b = next.fetch_add(1)) < n_blocks;) {
      try {
        body(b);
      } catch (...) {
        errors[b] = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(workers, int(n_blocks)));
  if (n == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Fixed-shape pairwise reduction: merge(a, b) folds b into a.
template <typename T, typename Merge>
T pairwise_reduce(std::vector<T>& parts, std::size_t lo, std::size_t hi, Merge&& merge) {
  if (hi - lo == 1) return std::move(parts[lo]);
  const std::size_t mid = lo + (hi - lo) / 2;
  T left = pairwise_reduce(parts, lo, mid, merge);
  T right = pairwise_reduce(parts, mid, hi, merge);
  merge(left, right);
  return left;
}

}  // namespace unravel

#endif  // UNRAVEL_PARALLEL_HPP_
