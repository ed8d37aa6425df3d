#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace retcurr {

// Runs fn(i) for i in [0, n) over up to `threads` workers using static
// contiguous blocks. fn must only write to slots owned by i, which keeps
// results independent of scheduling.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t block = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * block;
      const std::size_t end = std::min(n, begin + block);
      if (begin >= end) break;
      pool.emplace_back([begin, end, &fn, &err = errors[w]] {
        try {
          for (std::size_t i = begin; i < end; ++i) fn(i);
        } catch (...) {
          err = std::current_exception();
        }
      });
    }
  }
  // Lowest block first, so the reported error does not depend on timing.
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace retcurr
