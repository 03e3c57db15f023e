#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace cyclomdp {

// Seedable, cross-platform-stable PRNG stream (xoshiro256** seeded through
// splitmix64). Streams are derived from (seed, purpose, index), so adding a
// new consumer never perturbs the draws seen by existing ones.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view purpose,
            std::uint64_t index = 0);

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double next_double();
  double uniform(double lo, double hi);
  double normal();  // standard normal, Box-Muller
  // Categorical draw by CDF inversion; probs need not be exactly normalized.
  int sample_cdf(std::span<const double> probs);

 private:
  std::uint64_t s_[4];
};

}  // namespace cyclomdp
