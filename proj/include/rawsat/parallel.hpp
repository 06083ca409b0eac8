#pragma once

#include <cstddef>
#include <functional>

namespace rawsat {

// Worker count used by every parallel loop in the library. Zero selects
// std::thread::hardware_concurrency(). Results never depend on this value:
// each index owns its output and its RNG substream.
void set_thread_count(unsigned n);
unsigned thread_count();

// Runs fn(begin, end) over contiguous chunks of [0, n). Chunks smaller than
// min_grain are not split further.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t min_grain = 1);

}  // namespace rawsat
