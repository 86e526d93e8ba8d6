#pragma once

#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qsynth {

/* worker count: QS_WORKERS if set, else the hardware concurrency */
unsigned default_workers();

/*
 * function: parallel_for
 *
 * runs body(begin, end) over contiguous chunks of [0, n) on at most `workers`
 * threads; each chunk must only write to its own slots. the first exception
 * thrown by any chunk is rethrown after all threads joined
 */
template <class Body>
void parallel_for(std::size_t n, unsigned workers, Body&& body) {
  if (workers <= 1 || n < 2 * static_cast<std::size_t>(workers)) {
    if (n > 0)
      body(std::size_t{0}, n);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned t = 0; t < workers; ++t) {
    std::size_t begin = t * chunk;
    std::size_t end = begin + chunk < n ? begin + chunk : n;
    if (begin >= end)
      break;
    threads.emplace_back([&, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error)
          error = std::current_exception();
      }
    });
  }
  for (auto& th : threads)
    th.join();
  if (error)
    std::rethrow_exception(error);
}

}  // namespace qsynth
