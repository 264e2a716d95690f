#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "spikedcov/sampler.hpp"

namespace spikedcov {

enum class Criterion { kWaic, kGrowthRatio, kIcP3 };

std::string to_string(Criterion c);
Criterion parse_criterion(const std::string& name);  // "waic", "gr", "icp3"

struct SelectionResult {
  Criterion criterion = Criterion::kWaic;
  std::vector<double> scores;  // scores[k - 1] for k = 1..k_max
  Eigen::Index chosen_k = 1;
};

/// WAIC from a draws x n matrix of pointwise log-likelihoods, with the
/// variance-based effective number of parameters:
///   -2 sum_i log mean_s exp(l_si) + 2 sum_i var_s(l_si).
double waic(const MatrixXd& loglik);

/// GR(k) = log(1 + l_k / V(k)) / log(1 + l_{k+1} / V(k+1)), V(k) = sum_{j>k} l_j.
double growth_ratio(const SampleSpectrum& ss, Eigen::Index k);

/// log(||X - X U1 U1^T||_F^2 / (np)) + k log(n^p) / (n^p); residual floored at 1e-30.
double ic_p3(const DataMatrix& x, const Eigen::Ref<const MatrixXd>& u1);

struct SelectionOptions {
  Criterion criterion = Criterion::kWaic;
  Eigen::Index k_max = 0;  // 0: floor((n^p) / 2), capped at n^p - 2
  McmcSettings mcmc;       // WAIC chains; chain k uses seed mcmc.seed + k
  unsigned threads = 1;
};

SelectionResult select_k(const DataMatrix& x, const SampleSpectrum& ss, const SelectionOptions& opt);
SelectionResult select_k(const DataMatrix& x, const SelectionOptions& opt);

void to_json(nlohmann::json& j, const SelectionResult& r);

}  // namespace spikedcov
