#pragma once

#include <cstdint>
#include <functional>

namespace bell {

// Counter-based random stream: output i is a bijective 64-bit mix of
// (key, i), so streams can be split without sharing state. Substreams
// derive fresh keys; deriving the same id twice yields the same stream,
// which makes per-trial streams independent of thread scheduling.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

  RngStream substream(std::uint64_t id) const;

  std::uint64_t next_u64();
  double next_unit();            // uniform [0, 1)
  double next_angle();           // uniform [0, 2*pi)
  int next_sign();               // fair +1 / -1
  std::uint64_t next_below(std::uint64_t n);  // uniform {0, ..., n-1}, unbiased

 private:
  struct RawKeyTag {};
  RngStream(std::uint64_t key, RawKeyTag) : key_(key) {}

  std::uint64_t key_ = 0;
  std::uint64_t ctr_ = 0;
};

namespace detail {
std::uint64_t mix64(std::uint64_t z);
}

// Runs fn(block) for block = 0..n_blocks-1 on up to `workers` threads.
// fn must only write to state owned by its block index; the result is then
// independent of the worker count. Rethrows the first exception raised.
void parallel_for_blocks(std::size_t n_blocks, int workers,
                         const std::function<void(std::size_t)>& fn);

}  // namespace bell
