#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "spikedcov/estimators.hpp"
#include "test_util.hpp"

using namespace spikedcov;

namespace {

PosteriorDraws draws_from_columns(const MatrixXd& sorted_lambda) {
  PosteriorDraws d;
  d.sorted_lambda = sorted_lambda;
  return d;
}

PosteriorDraws vector_draws(const std::vector<VectorXd>& vs) {
  PosteriorDraws d;
  d.k = 1;
  d.sorted_lambda = MatrixXd::Ones(static_cast<Eigen::Index>(vs.size()), vs.front().size());
  for (const auto& v : vs) d.top_vectors.push_back(v);
  return d;
}

SampleSpectrum spectrum_with_trace(Eigen::Index n, Eigen::Index p, const VectorXd& eig, double trace) {
  SampleSpectrum ss = SampleSpectrum::from_parts(n, p, eig, OrthoMatrix::identity(p));
  ss.trace_s = trace;
  return ss;
}

}  // namespace

TEST_CASE("summarize_eigenvalues examples") {
  CHECK_THROWS_AS(summarize_eigenvalues(PosteriorDraws{}, 1), InputError);

  const auto constant = summarize_eigenvalues(draws_from_columns(MatrixXd::Constant(50, 2, 3.5)), 2);
  REQUIRE(constant.size() == 2);
  CHECK(constant[0].index == 1);
  CHECK(constant[1].index == 2);
  CHECK(constant[0].point == doctest::Approx(3.5));
  CHECK(constant[0].lo == doctest::Approx(3.5));
  CHECK(constant[0].hi == doctest::Approx(3.5));
  CHECK(constant[0].interval_length() == doctest::Approx(0.0));

  MatrixXd two(2, 1);
  two << 1.0, 3.0;
  CHECK(summarize_eigenvalues(draws_from_columns(two), 1)[0].point == doctest::Approx(2.0));

  Rng rng(3);
  MatrixXd m(401, 1);
  for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, 0) = std_normal(rng);
  std::vector<double> sorted(m.data(), m.data() + m.rows());
  std::sort(sorted.begin(), sorted.end());
  // With 401 draws the type-7 positions 0.025 * 400 = 10 and 0.975 * 400 = 390 are exact order statistics.
  const auto s = summarize_eigenvalues(draws_from_columns(m), 1)[0];
  CHECK(s.lo == sorted[10]);
  CHECK(s.hi == sorted[390]);
  CHECK(quantile_type7({1.0, 2.0, 3.0, 4.0}, 0.5) == doctest::Approx(2.5));

  nlohmann::json j = s;
  CHECK(j.at("index") == 1);
  CHECK(j.at("il").get<double>() == doctest::Approx(s.hi - s.lo));
}

TEST_CASE("estimate_eigenvectors examples") {
  VectorXd v(3);
  v << 0.6, 0.0, 0.8;
  const MatrixXd ref = v;
  CHECK((estimate_eigenvectors(vector_draws({v, v, v}), ref) - ref).norm() < 1e-14);
  CHECK((estimate_eigenvectors(vector_draws({v, -v}), ref) - ref).norm() < 1e-14);

  const VectorXd e1 = VectorXd::Unit(2, 0);
  const VectorXd diag = VectorXd::Ones(2) / std::sqrt(2.0);
  VectorXd expected(2);
  expected << 1.0 + 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  expected.normalize();
  const MatrixXd out = estimate_eigenvectors(vector_draws({e1, diag}), MatrixXd(e1));
  CHECK((out.col(0) - expected).norm() < 1e-14);
}

TEST_CASE("estimate_eigenvectors is invariant to flipping every draw") {
  Rng rng(11);
  std::vector<VectorXd> vs, flipped;
  for (int r = 0; r < 30; ++r) {
    VectorXd v = VectorXd::Unit(5, 0) + 0.3 * testing::random_gaussian(5, 1, rng);
    v.normalize();
    vs.push_back(v);
    flipped.push_back(-v);
  }
  const MatrixXd ref = VectorXd::Unit(5, 0);
  CHECK((estimate_eigenvectors(vector_draws(vs), ref) - estimate_eigenvectors(vector_draws(flipped), ref))
            .norm() < 1e-14);
}

TEST_CASE("estimate_eigenvectors rejects a degenerate average") {
  // Two orthogonal draws, each with a zero inner product with the reference:
  // both stay unflipped and cancel exactly.
  VectorXd a(3), b(3);
  a << 0.0, 1.0, 0.0;
  b << 0.0, -1.0, 0.0;
  CHECK_THROWS_AS(estimate_eigenvectors(vector_draws({a, b}), MatrixXd(VectorXd::Unit(3, 0))),
                  InvariantError);
}

TEST_CASE("spoet_eigenvalues examples") {
  VectorXd eig(4);
  eig << 10.0, 2.0, 1.0, 1.0;
  const SampleSpectrum ss = spectrum_with_trace(4, 6, eig, 14.0);
  CHECK(spoet_eigenvalues(ss, 1)(0) == doctest::Approx(58.0 / 7.0).epsilon(1e-14));

  VectorXd six = VectorXd::Zero(6);
  six(0) = 10.0;
  const SampleSpectrum zero = spectrum_with_trace(40, 6, six, 10.0);
  CHECK(spoet_eigenvalues(zero, 1)(0) == doctest::Approx(10.0));

  // np - nk - pk = 24 - 4k - 6k is negative for k = 3.
  CHECK_THROWS_AS(spoet_eigenvalues(ss, 3), DomainError);
  CHECK_THROWS_AS(spoet_eigenvalues(ss, 0), DomainError);
}

TEST_CASE("spoet_eigenvalues shrink and match a brute-force formula at k = rank - 1") {
  Rng rng(21);
  // n large enough that np - nk - pk > 0 at k = p - 1.
  const MatrixXd xm = testing::random_gaussian(500, 5, rng);
  const SampleSpectrum ss = sample_covariance(DataMatrix(xm));
  const Eigen::Index k = ss.rank_bound() - 1;
  const double n = 500.0, p = 5.0, kk = static_cast<double>(k);
  const VectorXd out = spoet_eigenvalues(ss, k);
  const MatrixXd s = xm.transpose() * xm / n;
  double residual = s.trace();
  for (Eigen::Index i = 0; i < k; ++i) residual -= ss.eigenvalues(i);
  REQUIRE(residual > 0.0);
  for (Eigen::Index j = 0; j < k; ++j) {
    CHECK(out(j) == doctest::Approx(ss.eigenvalues(j) - p / (n * p - n * kk - p * kk) * residual));
    CHECK(out(j) <= ss.eigenvalues(j));
  }
  const VectorXd small = spoet_eigenvalues(ss, 2);
  for (Eigen::Index j = 0; j < 2; ++j) CHECK(small(j) <= ss.eigenvalues(j));
}

TEST_CASE("spoet_interval examples") {
  const auto same = spoet_interval(7.0, 50, 0.0);
  CHECK(same.first == doctest::Approx(7.0));
  CHECK(same.second == doctest::Approx(7.0));

  CHECK(normal_two_sided_quantile(0.95) == doctest::Approx(1.959964).epsilon(1e-6));
  const auto iv = spoet_interval(10.0, 50, 0.95);
  const double half = 1.959963984540054 * 0.2;
  CHECK(iv.first == doctest::Approx(10.0 / (1.0 + half)).epsilon(1e-12));
  CHECK(iv.second == doctest::Approx(10.0 / (1.0 - half)).epsilon(1e-12));
  // Rounded divisors 1.3920 and 0.6080.
  CHECK(iv.first == doctest::Approx(10.0 / 1.3920).epsilon(1e-4));
  CHECK(iv.second == doctest::Approx(10.0 / 0.6080).epsilon(1e-4));
  CHECK(iv.first <= 10.0);
  CHECK(iv.second >= 10.0);

  // z sqrt(2 / 7) > 1 at the 95% level.
  CHECK_THROWS_AS(spoet_interval(1.0, 7, 0.95), DomainError);
  CHECK_THROWS_AS(normal_two_sided_quantile(1.0), DomainError);
}

TEST_CASE("cumulative_explained_variance and reduce_reconstruct") {
  VectorXd eig = VectorXd::Ones(100);
  eig.head(3) << 5.0, 4.0, 3.0;
  const SampleSpectrum ss = SampleSpectrum::from_parts(200, 100, eig, OrthoMatrix::identity(100));
  CHECK(cumulative_explained_variance(ss, 3) == doctest::Approx(12.0 / 109.0).epsilon(1e-14));

  Rng rng(4);
  const DataMatrix x(testing::random_gaussian(30, 6, rng));
  const SampleSpectrum sx = sample_covariance(x);
  const MatrixXd& q = sx.q.matrix();
  const Reduction full = reduce_reconstruct(x, q, sx);
  CHECK(full.nmse < 1e-28);
  CHECK(full.cve == doctest::Approx(1.0));

  double prev = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k <= 6; ++k) {
    const Reduction r = reduce_reconstruct(x, q.leftCols(k), sx);
    CHECK(r.nmse <= prev + 1e-15);
    prev = r.nmse;
    const MatrixXd brute = x.values() * q.leftCols(k) * q.leftCols(k).transpose();
    CHECK((r.reconstructed - brute).norm() < 1e-12);
  }

  CHECK_THROWS_AS(reduce_reconstruct(x, 2.0 * q.leftCols(2), sx), DomainError);
  CHECK_THROWS_AS(reduce_reconstruct(x, MatrixXd::Identity(5, 2), sx), InputError);
  CHECK_THROWS_AS(normalized_mse(MatrixXd::Constant(3, 3, 2.0), MatrixXd::Zero(3, 3)), DomainError);
}
