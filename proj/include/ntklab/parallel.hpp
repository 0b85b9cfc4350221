#pragma once

#include <cstddef>
#include <functional>

namespace ntklab {

// Process-wide worker cap (CLI --threads). 0 means hardware concurrency.
void set_max_threads(unsigned n) noexcept;
unsigned max_threads() noexcept;

// Split [0, n) into contiguous chunks and run fn(begin, end) on each, using
// at most max_threads() workers. Chunk boundaries depend only on n and the
// worker cap never changes what is computed, so outputs written to disjoint
// slots are bit-identical for any thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace ntklab
