#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace nsergo {

/// NSERGO_THREADS if set, else the hardware concurrency.
inline unsigned default_threads() {
  if (const char* env = std::getenv("NSERGO_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(trajectory, acc) for every trajectory in [0, count).
///
/// Trajectories are grouped into fixed chunks; each chunk accumulates into its own
/// make() in trajectory order and chunks are merged in chunk order, so the result
/// does not depend on the thread count or on scheduling.
template <typename Make, typename Body>
auto run_chunked(std::uint32_t count, Make&& make, Body&& body, unsigned threads = 0, std::uint32_t chunk = 64) {
  using Acc = decltype(make());
  const std::uint32_t chunks = (count + chunk - 1) / chunk;
  std::vector<std::optional<Acc>> partial(chunks);
  std::atomic<std::uint32_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  const auto worker = [&] {
    for (;;) {
      const std::uint32_t c = next.fetch_add(1);
      if (c >= chunks) return;
      try {
        Acc acc = make();
        const std::uint32_t end = std::min(count, (c + 1) * chunk);
        for (std::uint32_t t = c * chunk; t < end; ++t) body(t, acc);
        partial[c].emplace(std::move(acc));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(chunks);
        return;
      }
    }
  };

  if (threads == 0) threads = default_threads();
  threads = std::min<unsigned>(threads, std::max<std::uint32_t>(chunks, 1));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  Acc total = make();
  for (auto& p : partial) total.merge(*p);
  return total;
}

}  // namespace nsergo
