#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spikedcov/model.hpp"
#include "spikedcov/prior.hpp"

namespace spikedcov {

class UnreliableOracleError : public Error {
 public:
  using Error::Error;
};

/// Reference values for the tilted arcsine law exp(c a) a^{-1/2} (1-a)^{-1/2} on (0,1).
struct TiltedBetaReference {
  double c = 0.0;
  double normalizer = 0.0;  // integral of the unnormalized kernel
  double mean = 0.0;        // by quadrature
  double bessel_mean = 0.0; // closed form
  std::vector<double> grid_alpha;  // 512 points
  std::vector<double> grid_cdf;
};

/// Quadrature uses alpha = sin^2(u), which turns the kernel into 2 exp(c sin^2 u) on (0, pi/2).
TiltedBetaReference tilted_beta_reference(double c);
/// 1/2 + I1(c/2) / (2 I0(c/2)).
double tilted_beta_bessel_mean(double c);
double tilted_beta_cdf(double c, double alpha);
double tilted_beta_quantile(double c, double q);

struct GoodnessOfFit {
  double statistic = 0.0;
  double p_value = 0.0;
  std::vector<long> counts;
};

/// Pearson chi-square test of `samples` against `bins` equal-mass bins of the
/// tilted law (edges from the quadrature CDF).
GoodnessOfFit tilted_beta_gof(const std::vector<double>& samples, double c, int bins = 20);

/// Upper tail of the chi-square distribution.
double chi_square_sf(double statistic, double dof);

struct WeightedEstimate {
  double mean = 0.0;
  double se = 0.0;
};

struct PosteriorOracleResult {
  std::vector<WeightedEstimate> sorted_lambda;      // E[lambda_(j) | X], j = 1..p
  std::vector<WeightedEstimate> vector_error;       // E[1 - (e_j^T xi_(j))^2 | X], j = 1..p
  std::vector<WeightedEstimate> unordered_lambda;   // E[lambda_j | X] via c_j / (n + 2 a_j - 4)
  double ess = 0.0;
  long samples = 0;
};

/// Self-normalized importance sampling of the b = 1 posterior with Haar
/// proposals for Gamma, weights prod c_i^{-(a_i + n/2 - 1)} and exact
/// inverse-gamma draws for Lambda given Gamma. Reference vectors e_j are the
/// standard basis of the original coordinates. Throws when ESS < 100.
PosteriorOracleResult is_posterior_oracle(const SampleSpectrum& ss, const PriorConfig& cfg,
                                          long n_samples, Rng& rng, int inner_draws = 1);

/// Spiked-model asymptotic predictions for the leading sample eigenstructure.
struct ValidationTarget {
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  VectorXd spikes;
  double base = 1.0;

  double d(Eigen::Index j) const;  // p / (n lambda_{0,j})
  double dbar() const;             // mean non-spiked eigenvalue
  double predicted_ratio(Eigen::Index j) const { return 1.0 + dbar() * d(j); }
  double predicted_alignment(Eigen::Index j) const { return 1.0 / std::sqrt(predicted_ratio(j)); }
};

struct LemmaRow {
  Eigen::Index j = 0;  // 1-based
  WeightedEstimate ratio;      // mean of lambda_hat_j / lambda_{0,j}
  WeightedEstimate alignment;  // mean of |xi_{0,j}^T xi_hat_j|
  double predicted_ratio = 0.0;
  double predicted_alignment = 0.0;
  double ratio_deviation() const { return ratio.mean - predicted_ratio; }
  double alignment_deviation() const { return alignment.mean - predicted_alignment; }
};

struct LemmaCheck {
  bool skipped = false;
  std::string message;
  std::vector<LemmaRow> rows;
};

LemmaCheck lemma_asymptotics_check(const ValidationTarget& vt, long reps, std::uint64_t seed,
                                   unsigned threads = 1);

}  // namespace spikedcov
