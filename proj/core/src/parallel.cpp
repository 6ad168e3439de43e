#include "convdysat/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace convdysat {
namespace {

std::atomic<std::size_t> g_threads{1};

// Below this many scalar operations a kernel is not worth a thread launch.
constexpr std::size_t kMinParallelWork = 1 << 16;

}  // namespace

void set_num_threads(std::size_t n) { g_threads = std::max<std::size_t>(1, n); }

std::size_t num_threads() { return g_threads; }

void parallel_for(std::size_t n, std::size_t cost_per_item,
                  const std::function<void(std::size_t, std::size_t)>& body) {
  const std::size_t threads = std::min(g_threads.load(), n);
  if (threads <= 1 || n * std::max<std::size_t>(cost_per_item, 1) < kMinParallelWork) {
    if (n) body(0, n);
    return;
  }
  const std::size_t chunk = (n + threads - 1) / threads;
  std::vector<std::jthread> workers;
  workers.reserve(threads - 1);
  for (std::size_t t = 1; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([&body, begin, end] { body(begin, end); });
  }
  body(0, std::min(n, chunk));
}

}  // namespace convdysat
