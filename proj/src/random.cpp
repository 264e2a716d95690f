#include "spikedcov/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace spikedcov {

VonMisesDraw von_mises(Rng& rng, double kappa) {
  const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
  const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
  const double r = (1.0 + rho * rho) / (2.0 * rho);
  // r - 1 = (1 - rho)^2 / (2 rho), exact form avoids cancellation for large kappa.
  const double r_minus_1 = (1.0 - rho) * (1.0 - rho) / (2.0 * rho);
  for (;;) {
    const double z = std::cos(std::numbers::pi * uniform01(rng));
    const double f = (1.0 + r * z) / (r + z);
    const double cc = kappa * (r - f);
    const double u2 = uniform01(rng);
    if (cc * (2.0 - cc) - u2 > 0.0 || std::log(cc / u2) + 1.0 - cc >= 0.0) {
      const double one_minus_cos = r_minus_1 * (1.0 - z) / (r + z);
      double angle = std::acos(std::clamp(f, -1.0, 1.0));
      if (uniform01(rng) < 0.5) angle = -angle;
      return VonMisesDraw{angle, one_minus_cos};
    }
  }
}

}  // namespace spikedcov
