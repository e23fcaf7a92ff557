#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace scenefactor {

/// Runs fn(chunk_index) for chunk_index in [0, n_chunks) on up to `threads` threads.
/// The first exception thrown by any chunk is rethrown after all threads join.
template <typename Fn>
void parallel_chunks(int n_chunks, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, n_chunks));
  if (threads == 1) {
    for (int c = 0; c < n_chunks; ++c) fn(c);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_chunks));
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (int c = t; c < n_chunks; c += threads) {
        try {
          fn(c);
        } catch (...) {
          errors[static_cast<std::size_t>(c)] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace scenefactor
