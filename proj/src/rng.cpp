#include "poisonbench/rng.hpp"

#include <limits>

#include <fmt/core.h>

#include "poisonbench/hash.hpp"

namespace poisonbench {

std::uint64_t Rng::next_below(std::uint64_t n) {
  if (n < 2) return 0;
  // Reject the tail of the 2^64 range that would bias small residues.
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = kMax - (kMax % n + 1) % n;
  std::uint64_t v = next_u64();
  while (v > limit) v = next_u64();
  return v % n;
}

double Rng::next_gaussian() {
  if (has_cached_gaussian_) {
    has_cached_gaussian_ = false;
    return cached_gaussian_;
  }
  // Box-Muller on (0,1] uniforms; log(0) is unreachable.
  const double u1 = 1.0 - next_double();
  const double u2 = next_double();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
  cached_gaussian_ = r * std::sin(theta);
  has_cached_gaussian_ = true;
  return r * std::cos(theta);
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  return idx;
}

std::size_t floor_count(double fraction, std::size_t n) {
  const double product = fraction * static_cast<double>(n);
  auto count = static_cast<std::size_t>(std::floor(product + 1e-9));
  return count > n ? n : count;
}

std::string to_hex(std::uint64_t v) { return fmt::format("{:016x}", v); }

}  // namespace poisonbench
