#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace mcox {

// Worker-thread budget used by every parallel loop in the library. Defaults to
// std::thread::hardware_concurrency(). Results never depend on this value:
// work is split into blocks whose boundaries are fixed by the block size.
void set_num_threads(unsigned threads);
unsigned num_threads() noexcept;

// Runs body(begin, end) over consecutive blocks of `block` items covering
// [0, n). Blocks are handed out dynamically; a call made from inside a worker
// runs serially on that worker.
void parallel_for_blocks(std::size_t n, std::size_t block,
                         const std::function<void(std::size_t, std::size_t)>& body);

// Deterministic reduction: map_block(begin, end) yields one partial value per
// fixed-size block, then partials are combined pairwise in a fixed tree order.
// The answer is bitwise identical for any thread count.
template <class T, class MapBlock, class Combine>
T block_reduce(std::size_t n, std::size_t block, T identity, MapBlock map_block,
               Combine combine) {
  if (n == 0) return identity;
  const std::size_t n_blocks = (n + block - 1) / block;
  std::vector<T> partial(n_blocks, identity);
  parallel_for_blocks(n_blocks, 1, [&](std::size_t b0, std::size_t b1) {
    for (std::size_t b = b0; b < b1; ++b) {
      const std::size_t begin = b * block;
      const std::size_t end = begin + block < n ? begin + block : n;
      partial[b] = map_block(begin, end);
    }
  });
  for (std::size_t stride = 1; stride < n_blocks; stride *= 2) {
    for (std::size_t i = 0; i + stride < n_blocks; i += 2 * stride) {
      combine(partial[i], partial[i + stride]);
    }
  }
  return std::move(partial[0]);
}

// Neumaier compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) noexcept;
  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

}  // namespace mcox
