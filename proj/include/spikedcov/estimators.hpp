#pragma once

#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "spikedcov/sampler.hpp"

namespace spikedcov {

/// Posterior mean and equal-tailed 95% interval of the i-th largest eigenvalue.
struct EigenSummary {
  Eigen::Index index = 0;  // 1-based
  double point = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double interval_length() const { return hi - lo; }
};

/// Type-7 quantile (linear interpolation between order statistics).
double quantile_type7(std::vector<double> values, double q);

std::vector<EigenSummary> summarize_eigenvalues(const PosteriorDraws& d, Eigen::Index k);

/// Sign-align each draw's i-th vector to reference.col(i), average, normalize.
MatrixXd estimate_eigenvectors(const PosteriorDraws& d, const Eigen::Ref<const MatrixXd>& reference);

struct SpoetEstimate {
  VectorXd values;
  std::vector<std::pair<double, double>> intervals;
};

/// lambda_j - p / (np - nk - pk) * (tr S - sum_{i<=k} lambda_i), j <= k.
VectorXd spoet_eigenvalues(const SampleSpectrum& ss, Eigen::Index k);
/// Interval from sqrt(n) (value / lambda - 1) ~ N(0, 2).
std::pair<double, double> spoet_interval(double value, Eigen::Index n, double level = 0.95);
SpoetEstimate spoet(const SampleSpectrum& ss, Eigen::Index k, double level = 0.95);

/// Two-sided standard normal quantile z with P(|Z| <= z) = level.
double normal_two_sided_quantile(double level);

struct Reduction {
  MatrixXd reconstructed;
  double nmse = 0.0;
  double cve = 0.0;
};

/// Share of total sample variance in the top-k eigenvalues.
double cumulative_explained_variance(const SampleSpectrum& ss, Eigen::Index k);
/// Mean squared error divided by the squared range of the original values.
double normalized_mse(const MatrixXd& original, const MatrixXd& reconstructed);
/// Project X onto span(U1): X U1 U1^T, with NMSE and the top-k CVE.
Reduction reduce_reconstruct(const DataMatrix& x, const Eigen::Ref<const MatrixXd>& u1,
                             const SampleSpectrum& ss);

void to_json(nlohmann::json& j, const EigenSummary& s);

}  // namespace spikedcov
