#include "bell/rng.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>
#include <vector>

namespace bell {

namespace detail {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kStreamSalt = 0xD6E8FEB86659FD93ULL;
constexpr std::uint64_t kChildSalt = 0xA24BAED4963EE407ULL;
}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : key_(detail::mix64(detail::mix64(seed + kGolden) ^
                         detail::mix64(stream * kStreamSalt + kChildSalt))) {}

RngStream RngStream::substream(std::uint64_t id) const {
  return RngStream(
      detail::mix64(key_ ^ detail::mix64((id + 1) * kGolden + kChildSalt)),
      RawKeyTag{});
}

std::uint64_t RngStream::next_u64() {
  ctr_ += kGolden;
  return detail::mix64(key_ + ctr_);
}

double RngStream::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_angle() { return next_unit() * 2.0 * std::numbers::pi; }

int RngStream::next_sign() { return (next_u64() >> 63) ? 1 : -1; }

std::uint64_t RngStream::next_below(std::uint64_t n) {
  if (n == 0) return 0;
  const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

void parallel_for_blocks(std::size_t n_blocks, int workers,
                         const std::function<void(std::size_t)>& fn) {
  if (workers < 1) workers = 1;
  if (n_blocks == 0) return;
  if (workers == 1 || n_blocks == 1) {
    for (std::size_t i = 0; i < n_blocks; ++i) fn(i);
    return;
  }
  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(workers), n_blocks);
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n_blocks) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace bell
