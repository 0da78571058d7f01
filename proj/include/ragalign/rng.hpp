#pragma once

#include <cstdint>
#include <cstddef>
#include <utility>
#include <vector>

namespace ragalign {

// Deterministic PRNG: xoshiro256++ seeded through splitmix64, plus a
// Box-Muller Gaussian transform. std::random distributions are avoided
// on purpose: their output is implementation-defined, and every dataset
// and noise draw here must be byte-reproducible across platforms.
//
// Instances are single-owner; do not share one across concurrent tasks.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in (0, 1]; never returns 0 so log() is safe.
  double uniform01();

  // Uniform in [lo, hi).
  double uniform(double lo, double hi);

  // Unbiased integer in [0, bound); bound must be >= 1.
  std::uint64_t uniform_below(std::uint64_t bound);

  // Standard normal draw; Box-Muller with one cached spare.
  double gaussian();

  std::vector<double> gaussian_vector(std::size_t n);

  // Fisher-Yates, driven by uniform_below for platform stability.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t state_[4] = {0, 0, 0, 0};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ragalign
