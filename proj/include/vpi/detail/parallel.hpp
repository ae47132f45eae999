#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace vpi::detail {

/// Evaluates fn(i) for i in [0, n) on up to `workers` threads and returns the
/// results in index order, so the output does not depend on the worker count.
template <typename Fn>
auto parallel_map(std::size_t n, std::size_t workers, Fn&& fn) {
  using T = decltype(fn(std::size_t{0}));
  std::vector<T> out(n);
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        // Contiguous blocks; worker w owns [w*n/workers, (w+1)*n/workers).
        const std::size_t lo = w * n / workers;
        const std::size_t hi = (w + 1) * n / workers;
        for (std::size_t i = lo; i < hi; ++i) out[i] = fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace vpi::detail
