#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "spikedcov/selection.hpp"
#include "test_util.hpp"

using namespace spikedcov;

namespace {

SampleSpectrum spectrum_8421() {
  VectorXd eig(4);
  eig << 8.0, 4.0, 2.0, 1.0;
  return SampleSpectrum::from_parts(10, 4, eig, OrthoMatrix::identity(4));
}

}  // namespace

TEST_CASE("waic examples") {
  CHECK_THROWS_AS(waic(MatrixXd::Zero(1, 3)), InputError);

  MatrixXd same(5, 3);
  same << -1.0, -2.0, -3.0, -1.0, -2.0, -3.0, -1.0, -2.0, -3.0, -1.0, -2.0, -3.0, -1.0, -2.0, -3.0;
  CHECK(waic(same) == doctest::Approx(12.0));
  CHECK(waic(MatrixXd::Zero(2, 1)) == doctest::Approx(0.0));

  MatrixXd hand(2, 1);
  hand << std::log(1.0), std::log(3.0);
  const double l3 = std::log(3.0);
  CHECK(waic(hand) == doctest::Approx(-2.0 * std::log(2.0) + 2.0 * l3 * l3 / 2.0).epsilon(1e-14));

  // Very negative log-likelihoods stay finite through the max shift.
  CHECK(std::isfinite(waic(MatrixXd::Constant(3, 2, -2000.0))));
}

TEST_CASE("waic is invariant to reordering draws and observations") {
  Rng rng(6);
  const MatrixXd ll = -5.0 + testing::random_gaussian(40, 7, rng).array();
  const double base = waic(ll);
  const MatrixXd rows = ll.colwise().reverse();
  const MatrixXd cols = ll.rowwise().reverse();
  CHECK(waic(rows) == doctest::Approx(base).epsilon(1e-13));
  CHECK(waic(cols) == doctest::Approx(base).epsilon(1e-13));
}

TEST_CASE("growth_ratio examples") {
  const SampleSpectrum ss = spectrum_8421();
  CHECK(growth_ratio(ss, 1) == doctest::Approx(std::log(15.0 / 7.0) / std::log(7.0 / 3.0)).epsilon(1e-14));
  CHECK(growth_ratio(ss, 1) == doctest::Approx(0.8995).epsilon(1e-4));
  CHECK(growth_ratio(ss, 2) == doctest::Approx(std::log(7.0 / 3.0) / std::log(3.0)).epsilon(1e-14));
  CHECK(growth_ratio(ss, 2) == doctest::Approx(0.7712).epsilon(1e-4));
  CHECK_THROWS_AS(growth_ratio(ss, 0), DomainError);
  CHECK_THROWS_AS(growth_ratio(ss, 3), DomainError);

  VectorXd zeros(4);
  zeros << 3.0, 2.0, 0.0, 0.0;
  CHECK_THROWS_AS(
      growth_ratio(SampleSpectrum::from_parts(10, 4, zeros, OrthoMatrix::identity(4)), 1), DomainError);

  VectorXd dominant(6);
  dominant << 1000.0, 1.2, 1.1, 1.0, 0.9, 0.8;
  const SampleSpectrum big = SampleSpectrum::from_parts(20, 6, dominant, OrthoMatrix::identity(6));
  for (Eigen::Index k = 2; k <= 4; ++k) CHECK(growth_ratio(big, 1) > growth_ratio(big, k));
}

TEST_CASE("growth_ratio is scale invariant") {
  Rng rng(8);
  const SampleSpectrum ss = sample_covariance(DataMatrix(testing::random_gaussian(30, 12, rng)));
  const SampleSpectrum scaled = SampleSpectrum::from_parts(ss.n, ss.p, 7.5 * ss.eigenvalues, ss.q);
  for (Eigen::Index k = 1; k <= ss.rank_bound() - 2; ++k)
    CHECK(growth_ratio(scaled, k) == doctest::Approx(growth_ratio(ss, k)).epsilon(1e-12));
}

TEST_CASE("ic_p3 examples") {
  Rng rng(10);
  // Five observations in R^8: the top-5 sample eigenvectors span the row space.
  const DataMatrix wide(testing::random_gaussian(5, 8, rng));
  const SampleSpectrum sw = sample_covariance(wide);
  const double floored = ic_p3(wide, sw.q.matrix().leftCols(5));
  CHECK(floored == doctest::Approx(std::log(1e-30) + 5.0 * std::log(5.0) / 5.0));

  const DataMatrix x(testing::random_gaussian(20, 6, rng));
  CHECK(ic_p3(x, MatrixXd(6, 0)) == doctest::Approx(std::log(x.values().array().square().mean())));

  const SampleSpectrum sx = sample_covariance(x);
  const MatrixXd u1 = sx.q.matrix().leftCols(2);
  const MatrixXd proj = MatrixXd::Identity(6, 6) - u1 * u1.transpose();
  double brute = 0.0;
  for (Eigen::Index i = 0; i < 20; ++i) brute += (proj * x.values().row(i).transpose()).squaredNorm();
  const double expected = std::log(brute / 120.0) + 2.0 * std::log(6.0) / 6.0;
  CHECK(std::abs(ic_p3(x, u1) - expected) < 1e-10);

  // Rotating the basis within its span changes nothing.
  const MatrixXd rot = haar_sample(2, rng).matrix();
  CHECK(std::abs(ic_p3(x, u1 * rot) - ic_p3(x, u1)) < 1e-12);
}

TEST_CASE("select_k with the growth ratio") {
  const SampleSpectrum ss = spectrum_8421();
  Rng rng(12);
  const DataMatrix x(testing::random_gaussian(10, 4, rng));
  SelectionOptions opt;
  opt.criterion = Criterion::kGrowthRatio;
  opt.k_max = 2;
  const SelectionResult r = select_k(x, ss, opt);
  CHECK(r.chosen_k == 1);
  REQUIRE(r.scores.size() == 2);
  CHECK(r.scores[0] == doctest::Approx(growth_ratio(ss, 1)));

  opt.k_max = 3;
  CHECK_THROWS_AS(select_k(x, ss, opt), ConfigError);

  nlohmann::json j = r;
  CHECK(j.at("criterion") == "gr");
  CHECK(j.at("chosen_k") == 1);
  CHECK(j.at("scores").size() == 2);

  CHECK(parse_criterion("icp3") == Criterion::kIcP3);
  CHECK(parse_criterion(to_string(Criterion::kWaic)) == Criterion::kWaic);
  CHECK_THROWS_AS(parse_criterion("aic"), ConfigError);
}

TEST_CASE("GR and IC_p3 recover three comparable spikes") {
  SpikedScenario sc{200, 200, VectorXd(3), 1.0, std::nullopt};
  sc.spikes << 30.0, 25.0, 20.0;
  int gr_hits = 0, ic_hits = 0;
  for (std::uint64_t rep = 0; rep < 10; ++rep) {
    Rng rng(derive_seed(99, rep));
    const DataMatrix x = gen_spiked_data(sc, rng);
    const SampleSpectrum ss = sample_covariance(x);
    SelectionOptions opt;
    opt.k_max = 10;
    opt.criterion = Criterion::kGrowthRatio;
    gr_hits += select_k(x, ss, opt).chosen_k == 3;
    opt.criterion = Criterion::kIcP3;
    ic_hits += select_k(x, ss, opt).chosen_k == 3;
  }
  CHECK(gr_hits >= 9);
  CHECK(ic_hits >= 9);
}

TEST_CASE("select_k with WAIC is reproducible and thread-count independent") {
  SpikedScenario sc{40, 8, VectorXd::Constant(1, 25.0), 1.0, std::nullopt};
  Rng rng(14);
  const DataMatrix x = gen_spiked_data(sc, rng);
  SelectionOptions opt;
  opt.criterion = Criterion::kWaic;
  opt.k_max = 3;
  opt.mcmc.burn_in = 100;
  opt.mcmc.draws = 300;
  opt.mcmc.seed = 5;
  const SelectionResult one = select_k(x, opt);
  opt.threads = 3;
  const SelectionResult three = select_k(x, opt);
  CHECK(one.scores == three.scores);
  CHECK(one.chosen_k == three.chosen_k);
  CHECK(one.chosen_k >= 1);
  CHECK(one.chosen_k <= 3);
  for (double s : one.scores) CHECK(std::isfinite(s));
}
