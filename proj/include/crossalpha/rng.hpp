#pragma once

#include <cstdint>

namespace crossalpha {

/// Inverse of the standard normal CDF (Wichura's PPND16), accurate to
/// full double precision for p in (0, 1).
double normal_quantile(double p);

/// Seedable 64-bit generator with platform-independent output.
/// splitmix64 state transition; normal variates come from the inverse-CDF
/// transform so fixtures reproduce bit-exactly across implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform on the open interval (0, 1); never returns an endpoint.
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal variate via inverse CDF.
  double next_normal() { return normal_quantile(next_uniform()); }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_uniform();
  }

 private:
  std::uint64_t state_;
};

/// Deterministic sub-stream seed for (seed, index) pairs so per-security
/// simulation agrees bit-exactly between serial and parallel runs.
std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t index);

}  // namespace crossalpha
