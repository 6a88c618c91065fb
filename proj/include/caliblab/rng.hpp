#pragma once

#include <cstdint>
#include <random>

namespace caliblab {

std::uint64_t splitmix64(std::uint64_t x);

// Reproducible random stream identified by (master_seed, stream_index).
//
// The engine is std::mt19937_64 seeded with
//   splitmix64(master_seed ^ splitmix64(stream_index + 0x9E3779B97F4A7C15)).
// Uniform doubles use the top 53 bits of each draw, so streams are identical
// across standard libraries (no std::*_distribution is involved).
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_index);

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_index() const { return stream_index_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // 1 with probability p; p = 0 and p = 1 are exact.
  std::uint8_t bernoulli(double p) { return uniform() < p ? 1 : 0; }

  // Uniform index in [0, n).
  std::size_t index(std::size_t n);

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_index_;
  std::mt19937_64 engine_;
};

}  // namespace caliblab
