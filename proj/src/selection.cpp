#include "spikedcov/selection.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "spikedcov/parallel.hpp"

namespace spikedcov {

std::string to_string(Criterion c) {
  switch (c) {
    case Criterion::kWaic: return "waic";
    case Criterion::kGrowthRatio: return "gr";
    case Criterion::kIcP3: return "icp3";
  }
  return "unknown";
}

Criterion parse_criterion(const std::string& name) {
  if (name == "waic") return Criterion::kWaic;
  if (name == "gr") return Criterion::kGrowthRatio;
  if (name == "icp3" || name == "ic_p3") return Criterion::kIcP3;
  throw ConfigError("unknown selection criterion '" + name + "' (expected waic, gr or icp3)");
}

double waic(const MatrixXd& loglik) {
  const Eigen::Index s = loglik.rows();
  if (s < 2) throw InputError("waic: need at least 2 draws");
  double lppd = 0.0;
  double p_waic = 0.0;
  for (Eigen::Index i = 0; i < loglik.cols(); ++i) {
    const auto col = loglik.col(i);
    const double top = col.maxCoeff();
    lppd += top + std::log((col.array() - top).exp().mean());
    const double mean = col.mean();
    p_waic += (col.array() - mean).square().sum() / static_cast<double>(s - 1);
  }
  return -2.0 * lppd + 2.0 * p_waic;
}

double growth_ratio(const SampleSpectrum& ss, Eigen::Index k) {
  const Eigen::Index r = ss.rank_bound();
  if (k < 1 || k > r - 2) throw DomainError("growth_ratio: need 1 <= k <= n^p - 2");
  const auto& l = ss.eigenvalues;
  // V(k) sums the (1-based) eigenvalues k+1..n^p, i.e. 0-based indices k..r-1.
  const double v_k = l.segment(k, r - k).sum();
  const double v_k1 = l.segment(k + 1, r - k - 1).sum();
  if (!(v_k1 > 0.0)) throw DomainError("growth_ratio: V(k+1) is zero");
  return std::log1p(l(k - 1) / v_k) / std::log1p(l(k) / v_k1);
}

double ic_p3(const DataMatrix& x, const Eigen::Ref<const MatrixXd>& u1) {
  const auto n = static_cast<double>(x.n());
  const auto p = static_cast<double>(x.p());
  const double r = static_cast<double>(std::min(x.n(), x.p()));
  double residual = x.values().squaredNorm();
  if (u1.cols() > 0) {
    if (u1.rows() != x.p()) throw InputError("ic_p3: basis has wrong dimension");
    residual = (x.values() - x.values() * u1 * u1.transpose()).squaredNorm();
  }
  const double mean_sq = std::max(residual / (n * p), 1e-30);
  return std::log(mean_sq) + static_cast<double>(u1.cols()) * std::log(r) / r;
}

SelectionResult select_k(const DataMatrix& x, const SampleSpectrum& ss, const SelectionOptions& opt) {
  const Eigen::Index r = ss.rank_bound();
  Eigen::Index k_max = opt.k_max > 0 ? opt.k_max : std::min(r / 2, r - 2);
  if (k_max < 1 || k_max > r - 2) throw ConfigError("select_k: need 1 <= k_max <= n^p - 2");

  SelectionResult out;
  out.criterion = opt.criterion;
  out.scores.assign(static_cast<std::size_t>(k_max), 0.0);
  switch (opt.criterion) {
    case Criterion::kGrowthRatio:
      for (Eigen::Index k = 1; k <= k_max; ++k) out.scores[k - 1] = growth_ratio(ss, k);
      break;
    case Criterion::kIcP3:
      for (Eigen::Index k = 1; k <= k_max; ++k)
        out.scores[k - 1] = ic_p3(x, ss.q.matrix().leftCols(k));
      break;
    case Criterion::kWaic:
      parallel_for(static_cast<std::size_t>(k_max), opt.threads, [&](std::size_t idx) {
        const auto k = static_cast<Eigen::Index>(idx) + 1;
        McmcSettings ms = opt.mcmc;
        ms.seed = opt.mcmc.seed + static_cast<std::uint64_t>(k);
        const PosteriorDraws d = run_chain(ss, gsiw_data_driven(ss, k), ms, &x);
        out.scores[idx] = waic(d.loglik);
      });
      break;
  }
  const auto best = opt.criterion == Criterion::kGrowthRatio
                        ? std::max_element(out.scores.begin(), out.scores.end())
                        : std::min_element(out.scores.begin(), out.scores.end());
  out.chosen_k = static_cast<Eigen::Index>(best - out.scores.begin()) + 1;
  return out;
}

SelectionResult select_k(const DataMatrix& x, const SelectionOptions& opt) {
  return select_k(x, sample_covariance(x), opt);
}

void to_json(nlohmann::json& j, const SelectionResult& r) {
  j = nlohmann::json{{"criterion", to_string(r.criterion)}, {"scores", r.scores}, {"chosen_k", r.chosen_k}};
}

}  // namespace spikedcov
