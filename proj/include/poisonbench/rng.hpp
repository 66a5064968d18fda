#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace poisonbench {

// One splitmix64 step. Good enough mixing to derive independent seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Deterministic child seed for a named stream (per class, per tree, per
// fraction, ...). Two mixing rounds so nearby salts do not produce nearby
// generator states.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t s = base ^ (salt * 0x9e3779b97f4a7c15ull);
  splitmix64(s);
  return splitmix64(s);
}

// Reproducible random source. std::mt19937_64 output is fully specified by
// the standard; the distributions below are hand-rolled because the standard
// library's distribution objects are implementation-defined and would break
// cross-toolchain reproducibility of seeded experiments.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Unbiased integer in [0, n). Rejection sampling on the top bits.
  std::uint64_t next_below(std::uint64_t n);

  // Uniform double in [0, 1), 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; generates pairs, caches the second.
  double next_gaussian();

  // Fisher-Yates. Consumes exactly n-1 bounded draws for n elements.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i + 1));
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double cached_gaussian_ = 0.0;
  bool has_cached_gaussian_ = false;
};

// Identity permutation of size n shuffled under the given seed.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

// floor(fraction * n) with products within 1e-9 of an integer snapped up
// first, so decimal fractions behave like exact rationals (0.29 * 100 counts
// as 29 even though the IEEE product is 28.999999999999996).
std::size_t floor_count(double fraction, std::size_t n);

}  // namespace poisonbench
