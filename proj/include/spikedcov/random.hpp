#pragma once

#include <cstdint>
#include <random>

namespace spikedcov {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for replication/stream `index` under a base seed: seed xor hash(index).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return seed ^ mix64(index);
}

inline double uniform01(Rng& rng) {
  // (0,1): never returns exactly 0 so log(u) is safe.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x = u(rng);
  while (x <= 0.0) x = u(rng);
  return x;
}

inline double std_normal(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return n(rng);
}

inline int random_sign(Rng& rng) {
  return (rng() >> 63) ? 1 : -1;
}

/// Inverse-gamma draw with density proportional to x^{-shape-1} exp(-scale/x).
inline double inverse_gamma(Rng& rng, double shape, double scale) {
  std::gamma_distribution<double> g(shape, 1.0);
  return scale / g(rng);
}

/// Von Mises angle in (-pi, pi] with mean 0 and concentration kappa > 0
/// (Best & Fisher wrapped-Cauchy envelope). Also returns 1 - cos(angle)
/// computed without cancellation, which callers near the mode need.
struct VonMisesDraw {
  double angle;
  double one_minus_cos;
};
VonMisesDraw von_mises(Rng& rng, double kappa);

}  // namespace spikedcov
