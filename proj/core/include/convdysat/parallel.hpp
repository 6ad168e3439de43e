#pragma once

#include <cstddef>
#include <functional>

namespace convdysat {

// Upper bound on worker threads used inside numeric kernels. 1 means fully serial.
void set_num_threads(std::size_t n);
std::size_t num_threads();

// Splits [0, n) into contiguous chunks and runs `body(begin, end)` on each, possibly
// concurrently. Callers only partition independent output ranges, so every output
// element is computed by the same instruction sequence regardless of thread count.
void parallel_for(std::size_t n, std::size_t cost_per_item,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace convdysat
