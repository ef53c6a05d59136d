#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace thermoloss {

// splitmix64: used to expand a single 64-bit seed into generator state and
// to derive independent sub-seeds.
//   z = (state += 0x9E3779B97F4A7C15)
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
std::uint64_t splitmix64(std::uint64_t& state);

// Derives a child seed from (seed, stream) without consuming generator state.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// xoshiro256** (Blackman & Vigna), state filled from splitmix64(seed).
// All draws are defined bit-exactly so other languages can reproduce them:
//   uniform()      = (next() >> 11) * 2^-53              in [0, 1)
//   below(n)       = Lemire multiply-shift with rejection  in [0, n)
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t below(std::uint64_t n);

  // Fisher-Yates from the back: for i = n-1 .. 1, swap(i, below(i + 1)).
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  // k distinct indices from [0, n), in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k);

 private:
  std::uint64_t s_[4];
};

}  // namespace thermoloss
