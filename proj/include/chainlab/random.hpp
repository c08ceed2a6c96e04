#pragma once

// Counter-based random numbers: Philox4x32-10 keyed by the 64-bit seed, with
// the 128-bit counter holding (block, step, stream). Any variate is a pure
// function of (seed, stream, step, index), so streams split without state
// and results do not depend on scheduling. Normals use the inverse CDF.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace chainlab {

using Philox4x32Block = std::array<std::uint32_t, 4>;

inline Philox4x32Block philox4x32_10(Philox4x32Block ctr, std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
  constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
  for (int r = 0; r < 10; ++r) {
    const std::uint64_t a = static_cast<std::uint64_t>(m0) * ctr[0];
    const std::uint64_t b = static_cast<std::uint64_t>(m1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(a >> 32), lo0 = static_cast<std::uint32_t>(a);
    const auto hi1 = static_cast<std::uint32_t>(b >> 32), lo1 = static_cast<std::uint32_t>(b);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += w0;
    key[1] += w1;
  }
  return ctr;
}

/// Uniform in the open interval (0, 1) from 53 random bits.
inline double bits_to_open_unit(std::uint64_t x) {
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal quantile: Acklam's rational approximation refined by one Halley step.
inline double normal_quantile(double u) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double plow = 0.02425, phigh = 1.0 - plow;
  double x;
  if (u < plow) {
    const double q = std::sqrt(-2.0 * std::log(u));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (u <= phigh) {
    const double q = u - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - u));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - u;
  const double g = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - g / (1.0 + 0.5 * x * g);
}

/// Addressable stream: variates indexed by (step, index) for a fixed (seed, stream).
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint32_t stream) : seed_(seed), stream_(stream) {}

  /// Two uniforms from block (step, block).
  std::array<double, 2> uniform_pair(std::uint64_t step, std::uint32_t block) const {
    const Philox4x32Block ctr{block, static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32), stream_};
    const auto r = philox4x32_10(ctr, {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
    const std::uint64_t x = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
    const std::uint64_t y = (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
    return {bits_to_open_unit(x), bits_to_open_unit(y)};
  }

  double uniform(std::uint64_t step, std::uint32_t index) const { return uniform_pair(step, index / 2)[index % 2]; }
  double normal(std::uint64_t step, std::uint32_t index) const { return normal_quantile(uniform(step, index)); }

 private:
  std::uint64_t seed_;
  std::uint32_t stream_;
};

/// Sequential generator on top of CounterStream, for Monte Carlo sampling.
class SequentialRng {
 public:
  SequentialRng(std::uint64_t seed, std::uint32_t stream) : s_(seed, stream) {}
  double uniform() {
    if (have_ == 0) {
      buf_ = s_.uniform_pair(counter_ >> 32, static_cast<std::uint32_t>(counter_));
      ++counter_;
      have_ = 2;
    }
    return buf_[2 - have_--];
  }
  double normal() { return normal_quantile(uniform()); }

 private:
  CounterStream s_;
  std::uint64_t counter_ = 0;
  std::array<double, 2> buf_{};
  int have_ = 0;
};

}  // namespace chainlab
