#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace indistack {

/// Worker count: `requested` when positive, otherwise INDISTACK_THREADS,
/// otherwise the hardware concurrency.
inline unsigned resolve_threads(int requested = 0)
{
  if (requested > 0) return static_cast<unsigned>(requested);
  if (const char* env = std::getenv("INDISTACK_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(chunk_index, begin, end) for fixed-size chunks of [0, count).
/// Chunk boundaries do not depend on the worker count, so results written
/// per chunk are identical for any number of threads. The first exception
/// thrown by a worker is rethrown on the calling thread.
template<typename Fn>
void parallel_chunks(std::size_t count, std::size_t chunk, unsigned threads, Fn&& fn)
{
  if (count == 0) return;
  chunk = std::max<std::size_t>(chunk, 1);
  const std::size_t chunks = (count + chunk - 1) / chunk;
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(threads, 1u), chunks));
  if (workers == 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c, c * chunk, std::min(count, (c + 1) * chunk));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= chunks) return;
      try {
        fn(c, c * chunk, std::min(count, (c + 1) * chunk));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(chunks);
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

} // namespace indistack
