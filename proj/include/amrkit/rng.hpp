#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace amrkit {

// Seeded random stream with a fixed, documented algorithm so that results do
// not depend on the standard library's distribution implementations:
//   engine   std::mt19937_64 (the sequence is fixed by the C++ standard)
//   uniform  top 53 bits of one draw, scaled to [0, 1)
//   normal   Box-Muller on two uniforms, cosine branch only
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal(double mean = 0.0, double stddev = 1.0);
  // Uniform integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n);
  // Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer over (seed, stream) for deriving independent streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

}  // namespace amrkit
