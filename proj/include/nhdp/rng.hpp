#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace nhdp {

// Random number generation for the whole library.
//
// The engine is xoshiro256++ and every variate transform is written out by
// hand instead of going through std::*_distribution. The standard leaves
// distribution output implementation-defined, and we promise bit-identical
// reruns of any manifest across toolchains, so the mapping raw bits -> draws
// has to be owned by us. The engine likewise has to be pinned; this one is
// also cheap to construct, which matters because the split-merge kernels
// spin up a fresh short-lived stream for every proposal.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    // Expand the seed through splitmix64 so that nearby seeds (0, 1, 2, ...)
    // still land in unrelated states. All-zero state is unreachable: the
    // first expansion of any seed is nonzero.
    for (int i = 0; i < 4; ++i) {
      seed += 0x9e3779b97f4a7c15ULL;
      std::uint64_t z = seed;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      s_[i] = z ^ (z >> 31);
    }
  }

  std::uint64_t raw() { return next(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1); rejects exact zero so log(u) is always finite.
  double uniform_pos() {
    for (;;) {
      double u = uniform01();
      if (u > 0.0) return u;
    }
  }

  // Uniform on {0, ..., n-1}. uniform01() < 1, so u * n < n holds exactly.
  int uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
    return static_cast<int>(uniform01() * static_cast<double>(n));
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Standard normal via Box-Muller. One value per call (the sine companion is
  // discarded) so the draw sequence is a pure function of call order.
  double normal() {
    double u1 = uniform_pos();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Gamma(shape, scale) by Marsaglia-Tsang squeeze; shape < 1 handled with
  // the usual u^(1/shape) boost.
  double gamma(double shape, double scale) {
    if (shape <= 0.0 || scale <= 0.0)
      throw std::invalid_argument("gamma: shape and scale must be positive");
    if (shape < 1.0) {
      double u = uniform_pos();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      double u = uniform_pos();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v))
        return d * v * scale;
    }
  }

  double beta(double a, double b) {
    double x = gamma(a, 1.0);
    double y = gamma(b, 1.0);
    // Tiny shapes can underflow both gamma draws to zero. In that regime the
    // distribution concentrates on {0, 1} with P(1) = a / (a + b), so draw
    // the limit instead of returning 0/0.
    if (x + y == 0.0) return uniform01() < a / (a + b) ? 1.0 : 0.0;
    return x / (x + y);
  }

  // Inverse gamma with shape a and scale b (density ~ x^-(a+1) exp(-b/x)).
  double inv_gamma(double shape, double scale) {
    return 1.0 / gamma(shape, 1.0 / scale);
  }

  // Normal(mean, sd) conditioned on being positive, by rejection. Fine for
  // the priors used here (mean a couple of sds above zero).
  double trunc_normal_pos(double mean, double sd) {
    for (;;) {
      double x = normal(mean, sd);
      if (x > 0.0) return x;
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t next() {
    std::uint64_t out = rotl(s_[0] + s_[3], 23) + s_[0];
    std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return out;
  }

  std::uint64_t s_[4];
};

// Stream splitter for per-chain / per-purpose sub-streams. splitmix64 of the
// base seed and a salt; good dispersion even for adjacent seeds.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace nhdp
