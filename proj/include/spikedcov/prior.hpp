#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "spikedcov/model.hpp"

namespace spikedcov {

/// Hyperparameters of the generalized shrinkage inverse-Wishart family:
/// prior density on (Lambda, U) proportional to
///   etr(-1/2 U Lambda^{-1} U^T h I) / (prod lambda_i^{a_i} prod_{i<j} |lambda_i - lambda_j|^{b-1}).
/// b = 1 with per-coordinate a is gSIW, b = 0 is gIW; constant a gives SIW/IW.
struct PriorConfig {
  VectorXd a;
  int b = 1;
  double h = 1.0;
  Eigen::Index k = 0;

  Eigen::Index p() const { return a.size(); }
  /// Checks a_i > 2, a nondecreasing, b in {0,1}, h > 0, k >= 0 (and k < n^p when known).
  void validate(Eigen::Index rank_bound = -1) const;
};

/// Data-driven shapes: a_i = n t / (2 (lambda_i - t)) + 2 for i <= k, where t is
/// the mean of the non-spiked sample eigenvalues; p/2 on the remaining
/// n^p - k coordinates and 2p beyond; h = 4, b = 1. Bulk levels are raised to
/// keep a nondecreasing.
PriorConfig gsiw_data_driven(const SampleSpectrum& ss, Eigen::Index k);
/// Same shapes with b = 0.
PriorConfig giw_data_driven(const SampleSpectrum& ss, Eigen::Index k);
PriorConfig siw_fixed(Eigen::Index p, Eigen::Index k = 0);
PriorConfig iw_fixed(Eigen::Index p, Eigen::Index k = 0);

/// Mean of the non-spiked sample eigenvalues lambda_{k+1..n^p}.
double nonspiked_mean(const SampleSpectrum& ss, Eigen::Index k);

/// Soft checks of the high-dimensional spiked-model conditions.
std::vector<std::string> validate_assumptions(const SpikedScenario& sc);

void to_json(nlohmann::json& j, const PriorConfig& cfg);
void from_json(const nlohmann::json& j, PriorConfig& cfg);

}  // namespace spikedcov
