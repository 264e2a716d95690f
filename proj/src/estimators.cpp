#include "spikedcov/estimators.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>
#include <nlohmann/json.hpp>

namespace spikedcov {

double quantile_type7(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<EigenSummary> summarize_eigenvalues(const PosteriorDraws& d, Eigen::Index k) {
  if (d.size() == 0) throw InputError("summarize_eigenvalues: no draws");
  if (k < 0 || k > d.sorted_lambda.cols()) throw DomainError("summarize_eigenvalues: bad k");
  std::vector<EigenSummary> out;
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto col = d.sorted_lambda.col(i);
    std::vector<double> v(col.begin(), col.end());
    EigenSummary s;
    s.index = i + 1;
    s.point = col.mean();
    s.lo = quantile_type7(v, 0.025);
    s.hi = quantile_type7(std::move(v), 0.975);
    out.push_back(s);
  }
  return out;
}

MatrixXd estimate_eigenvectors(const PosteriorDraws& d, const Eigen::Ref<const MatrixXd>& reference) {
  if (d.top_vectors.empty()) throw InputError("estimate_eigenvectors: no draws");
  const Eigen::Index k = reference.cols();
  if (d.top_vectors.front().cols() < k || d.top_vectors.front().rows() != reference.rows())
    throw InputError("estimate_eigenvectors: reference does not match stored vectors");
  MatrixXd acc = MatrixXd::Zero(reference.rows(), k);
  for (const auto& draw : d.top_vectors) {
    for (Eigen::Index i = 0; i < k; ++i) {
      const double sign = draw.col(i).dot(reference.col(i)) < 0.0 ? -1.0 : 1.0;
      acc.col(i) += sign * draw.col(i);
    }
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    const double norm = acc.col(i).norm();
    if (!(norm > 1e-12 * static_cast<double>(d.top_vectors.size())))
      throw InvariantError("estimate_eigenvectors: aligned average has zero norm (degenerate posterior)");
    acc.col(i) /= norm;
  }
  return acc;
}

VectorXd spoet_eigenvalues(const SampleSpectrum& ss, Eigen::Index k) {
  if (k < 1 || k > ss.rank_bound()) throw DomainError("spoet_eigenvalues: need 1 <= k <= n^p");
  const double n = static_cast<double>(ss.n);
  const double p = static_cast<double>(ss.p);
  const double kk = static_cast<double>(k);
  const double denom = n * p - n * kk - p * kk;
  if (!(denom > 0.0)) throw DomainError("spoet_eigenvalues: np - nk - pk must be positive (k too large)");
  const double residual = ss.trace_s - ss.eigenvalues.head(k).sum();
  return ss.eigenvalues.head(k).array() - p / denom * residual;
}

double normal_two_sided_quantile(double level) {
  if (!(level >= 0.0 && level < 1.0)) throw DomainError("confidence level must be in [0, 1)");
  if (level == 0.0) return 0.0;
  return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + 0.5 * level);
}

std::pair<double, double> spoet_interval(double value, Eigen::Index n, double level) {
  const double half = normal_two_sided_quantile(level) * std::sqrt(2.0 / static_cast<double>(n));
  if (!(1.0 - half > 0.0))
    throw DomainError("spoet_interval: sample size too small for the requested level");
  return {value / (1.0 + half), value / (1.0 - half)};
}

SpoetEstimate spoet(const SampleSpectrum& ss, Eigen::Index k, double level) {
  SpoetEstimate est;
  est.values = spoet_eigenvalues(ss, k);
  for (double v : est.values) est.intervals.push_back(spoet_interval(v, ss.n, level));
  return est;
}

double cumulative_explained_variance(const SampleSpectrum& ss, Eigen::Index k) {
  if (k < 0 || k > ss.rank_bound()) throw DomainError("cumulative_explained_variance: bad k");
  const double total = ss.eigenvalues.sum();
  if (!(total > 0.0)) throw DomainError("cumulative_explained_variance: zero total variance");
  return ss.eigenvalues.head(k).sum() / total;
}

double normalized_mse(const MatrixXd& original, const MatrixXd& reconstructed) {
  const double range = original.maxCoeff() - original.minCoeff();
  if (!(range > 0.0)) throw DomainError("normalized_mse: data have zero range");
  return (original - reconstructed).array().square().mean() / (range * range);
}

Reduction reduce_reconstruct(const DataMatrix& x, const Eigen::Ref<const MatrixXd>& u1,
                             const SampleSpectrum& ss) {
  if (u1.rows() != x.p()) throw InputError("reduce_reconstruct: basis has wrong dimension");
  const Eigen::Index k = u1.cols();
  if ((u1.transpose() * u1 - MatrixXd::Identity(k, k)).norm() > 1e-8)
    throw DomainError("reduce_reconstruct: basis columns are not orthonormal");
  Reduction r;
  r.reconstructed = x.values() * u1 * u1.transpose();
  r.nmse = normalized_mse(x.values(), r.reconstructed);
  r.cve = cumulative_explained_variance(ss, std::min(k, ss.rank_bound()));
  return r;
}

void to_json(nlohmann::json& j, const EigenSummary& s) {
  j = nlohmann::json{{"index", s.index},
                     {"point", s.point},
                     {"lo", s.lo},
                     {"hi", s.hi},
                     {"il", s.interval_length()}};
}

}  // namespace spikedcov
