#include <cmath>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "spikedcov/oracle.hpp"
#include "spikedcov/sampler.hpp"
#include "test_util.hpp"

using namespace spikedcov;
using spikedcov::testing::batch_mean_se;
using spikedcov::testing::mean_se;

namespace {

SampleSpectrum synthetic_spectrum(Eigen::Index n, Eigen::Index p, std::uint64_t seed, double spike = 8.0) {
  SpikedScenario sc{n, p, VectorXd::Constant(1, spike), 1.0, std::nullopt};
  Rng rng(seed);
  return sample_covariance(gen_spiked_data(sc, rng));
}

ChainState random_state(const SampleSpectrum& ss, const PriorConfig& cfg, Rng& rng) {
  ChainState st;
  st.gamma = haar_sample(ss.p, rng).matrix();
  st.c = compute_c(st.gamma, posterior_scale_diag(ss, cfg.h));
  st.lambda.resize(ss.p);
  for (Eigen::Index i = 0; i < ss.p; ++i) st.lambda(i) = 0.5 + 5.0 * uniform01(rng);
  return st;
}

// Log of the pair conditional etr(-1/2 H1 G1 Lambda^{-1} G1^T) for rows i, j.
double pair_log_target(const ChainState& st, Eigen::Index i, Eigen::Index j, const VectorXd& scale) {
  double acc = 0.0;
  for (Eigen::Index l = 0; l < st.lambda.size(); ++l)
    acc += (scale(i) * st.gamma(i, l) * st.gamma(i, l) + scale(j) * st.gamma(j, l) * st.gamma(j, l)) /
           st.lambda(l);
  return -0.5 * acc;
}

}  // namespace

TEST_CASE("compute_c examples") {
  const SampleSpectrum ss = synthetic_spectrum(6, 9, 1);
  const double h = 4.0;
  const VectorXd c = compute_c(MatrixXd::Identity(9, 9), ss, h);
  for (Eigen::Index i = 0; i < 6; ++i) CHECK(c(i) == doctest::Approx(h + 6.0 * ss.eigenvalues(i)));
  for (Eigen::Index i = 6; i < 9; ++i) CHECK(c(i) == doctest::Approx(h));

  // Permutation matrix: column relabeling of the identity case.
  MatrixXd perm = MatrixXd::Zero(9, 9);
  std::vector<int> sigma{3, 0, 8, 1, 7, 2, 6, 4, 5};
  for (int col = 0; col < 9; ++col) perm(sigma[col], col) = 1.0;
  const VectorXd cp = compute_c(perm, ss, h);
  for (int col = 0; col < 9; ++col) CHECK(cp(col) == doctest::Approx(c(sigma[col])));

  Rng rng(2);
  const OrthoMatrix g = haar_sample(9, rng);
  MatrixXd h0 = MatrixXd(posterior_scale_diag(ss, h).asDiagonal());
  const VectorXd dense = (g.matrix().transpose() * h0 * g.matrix()).diagonal();
  CHECK((compute_c(g.matrix(), ss, h) - dense).norm() < 1e-10);
}

TEST_CASE("inverse-gamma lambda step moments") {
  // shape a + n/2 - 1 = 3 and scale c/2 = 4: mean scale / (shape - 1) = 2.
  PriorConfig cfg{VectorXd::Constant(2, 3.0), 1, 1.0, 0};
  ChainState st;
  st.gamma = RowMatrixXd::Identity(2, 2);
  st.c = VectorXd::Constant(2, 8.0);
  st.lambda = VectorXd::Ones(2);
  Rng rng(5);
  std::vector<double> draws;
  for (int s = 0; s < 20000; ++s) {
    sample_lambda_step(st, cfg, 2, rng);
    draws.push_back(st.lambda(0));
  }
  const auto ms = mean_se(draws);
  CHECK(std::abs(ms.mean - 2.0) < 4.0 * ms.se);
}

TEST_CASE("b = 0 Metropolis step") {
  VectorXd lambda(3);
  lambda << 1.0, 2.0, 5.0;
  CHECK(repulsion_log_ratio(lambda, 1, 2.0) == doctest::Approx(0.0));
  // |4-1| |4-5| / (|2-1| |2-5|) = 1.
  CHECK(repulsion_log_ratio(lambda, 1, 4.0) == doctest::Approx(0.0));
  CHECK(repulsion_log_ratio(lambda, 1, 3.0) == doctest::Approx(std::log(2.0 * 2.0 / 3.0)));
}

TEST_CASE("b = 1 conditional mean c_i / (n + 2 a_i - 4) at fixed Gamma") {
  const SampleSpectrum ss = synthetic_spectrum(30, 6, 3);
  const PriorConfig cfg = gsiw_data_driven(ss, 1);
  Rng rng(9);
  ChainState st = random_state(ss, cfg, rng);
  const VectorXd target = st.c.array() / (30.0 + 2.0 * cfg.a.array() - 4.0);
  std::vector<std::vector<double>> draws(6);
  for (int s = 0; s < 20000; ++s) {
    sample_lambda_step(st, cfg, ss.n, rng);
    for (int i = 0; i < 6; ++i) draws[i].push_back(st.lambda(i));
  }
  for (int i = 0; i < 6; ++i) {
    const auto ms = mean_se(draws[i]);
    CHECK(std::abs(ms.mean - target(i)) < 4.0 * ms.se);
  }
}

TEST_CASE("sample_tilted_beta examples") {
  Rng rng(13);
  CHECK_THROWS_AS(sample_tilted_beta(0.5, rng), DomainError);
  for (double c : {0.0, -10.0}) {
    std::vector<double> a(20000);
    for (auto& v : a) v = sample_tilted_beta(c, rng);
    const auto ms = mean_se(a);
    CHECK(std::abs(ms.mean - tilted_beta_bessel_mean(c)) < 4.0 * ms.se);
  }
  std::vector<double> strong(20000);
  for (auto& v : strong) {
    v = sample_tilted_beta(-1000.0, rng);
    REQUIRE(v > 0.0);
    REQUIRE(v < 1.0);
  }
  CHECK(tilted_beta_gof(strong, -1000.0).p_value > 0.001);
}

TEST_CASE("von Mises path agrees with the arcsine-rejection reference") {
  Rng rng(19);
  for (double c : {-1.5, -4.0}) {
    std::vector<double> fast(20000), slow(20000);
    for (auto& v : fast) v = sample_tilted_beta(c, rng);
    for (auto& v : slow) v = sample_tilted_beta_reference(c, rng);
    const auto a = mean_se(fast);
    const auto b = mean_se(slow);
    CHECK(std::abs(a.mean - b.mean) < 4.0 * std::hypot(a.se, b.se));
    CHECK(tilted_beta_gof(fast, c).p_value > 0.001);
  }
}

TEST_CASE("sample_pair_rotation degenerate tilts and cache coherence") {
  const SampleSpectrum ss = synthetic_spectrum(10, 5, 4);
  const PriorConfig cfg = gsiw_data_driven(ss, 1);
  const VectorXd scale = posterior_scale_diag(ss, cfg.h);
  Rng rng(21);

  ChainState unit = random_state(ss, cfg, rng);
  unit.lambda.setOnes();
  const PairUpdate u = sample_pair_rotation(unit, 0, 1, scale, rng);
  CHECK(u.s1 == doctest::Approx(1.0));
  CHECK(u.s2 == doctest::Approx(1.0));
  CHECK(std::abs(u.tilt) < 1e-12);

  // Rows beyond n^p share h1 = h2 = h.
  SampleSpectrum wide = synthetic_spectrum(4, 8, 5);
  const VectorXd wide_scale = posterior_scale_diag(wide, 4.0);
  ChainState ws = random_state(wide, siw_fixed(8), rng);
  CHECK(sample_pair_rotation(ws, 5, 7, wide_scale, rng).tilt == 0.0);

  ChainState st = random_state(ss, cfg, rng);
  for (int t = 0; t < 200; ++t) {
    std::uniform_int_distribution<int> pick(0, 4);
    int i = pick(rng), j = pick(rng);
    if (i == j) continue;
    if (i > j) std::swap(i, j);
    sample_pair_rotation(st, i, j, scale, rng);
    CHECK(orthogonality_defect(MatrixXd(st.gamma)) < 1e-12);
    const VectorXd fresh = compute_c(st.gamma, scale);
    CHECK((st.c - fresh).cwiseAbs().maxCoeff() <= 1e-8 * fresh.cwiseAbs().maxCoeff());
  }

  ChainState bad = random_state(ss, cfg, rng);
  bad.lambda(2) = -1.0;
  CHECK_THROWS_AS(sample_pair_rotation(bad, 0, 1, scale, rng), InvariantError);
  CHECK_THROWS_AS(sample_pair_rotation(st, 2, 1, scale, rng), IndexError);
}

TEST_CASE("pair target is invariant to signs and the phi branch") {
  const SampleSpectrum ss = synthetic_spectrum(12, 6, 6);
  const VectorXd scale = posterior_scale_diag(ss, 4.0);
  Rng rng(25);
  ChainState st = random_state(ss, siw_fixed(6), rng);
  for (int trial = 0; trial < 50; ++trial) {
    const double theta = std::numbers::pi * (uniform01(rng) - 0.5);
    ChainState a = st, b = st;
    rotate_rows(a.gamma, 1, 4, std::cos(theta), std::sin(theta), 1, 1);
    rotate_rows(b.gamma, 1, 4, std::cos(theta), std::sin(theta), random_sign(rng), random_sign(rng));
    CHECK(std::abs(pair_log_target(a, 1, 4, scale) - pair_log_target(b, 1, 4, scale)) < 1e-10);

    // theta and -theta - 2 omega share cos^2(theta + omega).
    const double a11 = (st.gamma.row(1).array().square() / st.lambda.transpose().array()).sum();
    const double a12 = (st.gamma.row(1).array() * st.gamma.row(4).array() / st.lambda.transpose().array()).sum();
    const double a22 = (st.gamma.row(4).array().square() / st.lambda.transpose().array()).sum();
    const double omega = eig2x2_with_angle(a11, a12, a22).omega;
    const double mirror = -theta - 2.0 * omega;
    ChainState m = st;
    rotate_rows(m.gamma, 1, 4, std::cos(mirror), std::sin(mirror), 1, 1);
    CHECK(std::abs(pair_log_target(a, 1, 4, scale) - pair_log_target(m, 1, 4, scale)) < 1e-10);
  }
}

TEST_CASE("pair update alpha follows the tilted law at a frozen state") {
  const SampleSpectrum ss = synthetic_spectrum(20, 5, 7, 20.0);
  const PriorConfig cfg = gsiw_data_driven(ss, 1);
  const VectorXd scale = posterior_scale_diag(ss, cfg.h);
  Rng rng(27);
  const ChainState frozen = random_state(ss, cfg, rng);
  std::vector<double> alphas;
  double tilt = 0.0;
  for (int s = 0; s < 20000; ++s) {
    ChainState st = frozen;
    const PairUpdate u = sample_pair_rotation(st, 0, 2, scale, rng);
    tilt = u.tilt;
    // Recover alpha from the resulting rows to test the whole update path.
    const double a11 = (st.gamma.row(0).array().square() / st.lambda.transpose().array()).sum();
    const double a12 = (st.gamma.row(0).array() * st.gamma.row(2).array() / st.lambda.transpose().array()).sum();
    const double a22 = (st.gamma.row(2).array().square() / st.lambda.transpose().array()).sum();
    // After the update the rows' 2x2 matrix is R diag(s) R^T with cos^2 of its angle = alpha.
    const TwoByTwoEig e = eig2x2_with_angle(a11, a12, a22);
    const double c2 = std::cos(e.omega) * std::cos(e.omega);
    alphas.push_back(c2);
    CHECK(u.alpha == doctest::Approx(c2).epsilon(1e-6));
  }
  REQUIRE(tilt < -1.0);
  CHECK(tilted_beta_gof(alphas, tilt).p_value > 0.001);
}

TEST_CASE("gibbs_sweep schedules and determinism") {
  const SampleSpectrum two = SampleSpectrum::from_parts(5, 2, (VectorXd(2) << 3.0, 1.0).finished(),
                                                        OrthoMatrix::identity(2));
  const PriorConfig cfg2 = siw_fixed(2);
  Rng r0(1);
  ChainState s2 = initial_state(two, cfg2);
  gibbs_sweep(s2, PairSchedule::full(), cfg2, two, posterior_scale_diag(two, cfg2.h), r0);
  CHECK(orthogonality_defect(MatrixXd(s2.gamma)) < 1e-12);

  const SampleSpectrum ss = synthetic_spectrum(15, 8, 8);
  const PriorConfig cfg = gsiw_data_driven(ss, 1);
  const VectorXd scale = posterior_scale_diag(ss, cfg.h);
  Rng a(77), b(77);
  ChainState x = initial_state(ss, cfg), y = initial_state(ss, cfg);
  for (int s = 0; s < 100; ++s) {
    gibbs_sweep(x, PairSchedule::full(), cfg, ss, scale, a);
    gibbs_sweep(y, PairSchedule::full(), cfg, ss, scale, b);
    if (s % 17 == 0) {
      const VectorXd fresh = compute_c(x.gamma, scale);
      CHECK((x.c - fresh).cwiseAbs().maxCoeff() <= 1e-8 * fresh.maxCoeff());
    }
  }
  CHECK((x.gamma - y.gamma).norm() == 0.0);
  CHECK((x.lambda - y.lambda).norm() == 0.0);
  CHECK(orthogonality_defect(MatrixXd(x.gamma)) < 1e-10);
  CHECK(x.lambda.minCoeff() > 0.0);

  Rng c(3);
  ChainState z = initial_state(ss, cfg);
  for (int s = 0; s < 50; ++s) gibbs_sweep(z, PairSchedule::random_scan(10), cfg, ss, scale, c);
  CHECK(orthogonality_defect(MatrixXd(z.gamma)) < 1e-10);
}

TEST_CASE("run_chain bookkeeping") {
  const SampleSpectrum ss = synthetic_spectrum(15, 6, 9);
  const PriorConfig cfg = gsiw_data_driven(ss, 2 - 1);
  McmcSettings ms;
  ms.burn_in = 20;
  ms.draws = 90;
  ms.thin = 4;
  ms.seed = 5;
  const PosteriorDraws d = run_chain(ss, cfg, ms);
  CHECK(d.size() == 22);
  CHECK(d.top_vectors.size() == 22);
  for (Eigen::Index r = 0; r < d.size(); ++r) {
    for (Eigen::Index m = 1; m < 6; ++m) CHECK(d.sorted_lambda(r, m) <= d.sorted_lambda(r, m - 1));
    CHECK(d.top_vectors[r].col(0).norm() == doctest::Approx(1.0));
  }
  const PosteriorDraws again = run_chain(ss, cfg, ms);
  CHECK((again.sorted_lambda - d.sorted_lambda).norm() == 0.0);
  CHECK((again.top_vectors.back() - d.top_vectors.back()).norm() == 0.0);

  McmcSettings zero = ms;
  zero.draws = 0;
  CHECK_THROWS_AS(run_chain(ss, cfg, zero), ConfigError);

  const nlohmann::json summary = draws_summary(d);
  CHECK(summary.at("retained_draws") == 22);
  const McmcSettings back = summary.at("settings").get<McmcSettings>();
  CHECK(back.thin == 4);
  std::ostringstream csv;
  write_draws_csv(d, csv);
  const std::string text = csv.str();
  CHECK(text.rfind("lambda_1,lambda_2", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 23);
}

TEST_CASE("run_chain log-likelihoods match gauss_loglik") {
  SpikedScenario sc{8, 4, VectorXd::Constant(1, 6.0), 1.0, std::nullopt};
  Rng rng(12);
  const DataMatrix x = gen_spiked_data(sc, rng);
  const SampleSpectrum ss = sample_covariance(x);
  const PriorConfig cfg = siw_fixed(4, 4);
  McmcSettings ms;
  ms.burn_in = 5;
  ms.draws = 3;
  ms.seed = 1;
  const PosteriorDraws d = run_chain(ss, cfg, ms, &x);
  REQUIRE(d.loglik.rows() == 3);
  REQUIRE(d.loglik.cols() == 8);
  // All four eigenvectors are stored (k = 4), so Sigma can be rebuilt per draw.
  for (Eigen::Index r = 0; r < 3; ++r) {
    const OrthoMatrix u = OrthoMatrix::from_trusted(d.top_vectors[r]);
    for (Eigen::Index i = 0; i < 8; ++i) {
      const double ref = gauss_loglik(x.values().row(i).transpose(), d.sorted_lambda.row(r).transpose(), u);
      CHECK(d.loglik(r, i) == doctest::Approx(ref).epsilon(1e-10));
    }
  }
}

TEST_CASE("run_chain agrees with the importance-sampling oracle (p = 4, n = 12)") {
  const SampleSpectrum ss = synthetic_spectrum(12, 4, 42);
  const PriorConfig cfg = gsiw_data_driven(ss, 1);
  Rng rng(7);
  const PosteriorOracleResult orc = is_posterior_oracle(ss, cfg, 200000, rng);
  McmcSettings ms;
  ms.burn_in = 500;
  ms.draws = 100000;
  ms.seed = 3;
  const PosteriorDraws d = run_chain(ss, cfg, ms);
  std::vector<double> top(d.size()), err(d.size());
  for (Eigen::Index r = 0; r < d.size(); ++r) {
    top[r] = d.sorted_lambda(r, 0);
    err[r] = 1.0 - d.top_vectors[r](0, 0) * d.top_vectors[r](0, 0);
  }
  const auto g1 = batch_mean_se(top);
  const auto g2 = batch_mean_se(err);
  CHECK(std::abs(g1.mean - orc.sorted_lambda[0].mean) < 3.0 * std::hypot(g1.se, orc.sorted_lambda[0].se));
  CHECK(std::abs(g2.mean - orc.vector_error[0].mean) < 3.0 * std::hypot(g2.se, orc.vector_error[0].se));
}

TEST_CASE("b = 0 chain matches the reweighted b = 1 chain on a flat target") {
  // All sample eigenvalues equal and all shapes equal: c_i is constant in Gamma,
  // so under b = 1 the lambda_i are iid inverse-gamma and the b = 0 target is
  // that law reweighted by prod_{i<j} |lambda_i - lambda_j|.
  const SampleSpectrum ss = SampleSpectrum::from_parts(6, 3, VectorXd::Constant(3, 2.0), OrthoMatrix::identity(3));
  PriorConfig b1{VectorXd::Constant(3, 3.0), 1, 1.0, 1};
  PriorConfig b0 = b1;
  b0.b = 0;
  McmcSettings ms;
  ms.burn_in = 200;
  ms.draws = 60000;
  ms.seed = 17;
  const PosteriorDraws d1 = run_chain(ss, b1, ms);
  ms.seed = 18;
  const PosteriorDraws d0 = run_chain(ss, b0, ms);
  CHECK(d0.lambda_acceptance < 1.0);

  double sw = 0.0, swf = 0.0, sw2 = 0.0, sw2f = 0.0, sw2ff = 0.0;
  for (Eigen::Index r = 0; r < d1.size(); ++r) {
    const auto l = d1.sorted_lambda.row(r);
    const double w = (l(0) - l(1)) * (l(0) - l(2)) * (l(1) - l(2));
    const double f = l(0);
    sw += w;
    swf += w * f;
    sw2 += w * w;
    sw2f += w * w * f;
    sw2ff += w * w * f * f;
  }
  const double is_mean = swf / sw;
  const double is_se = std::sqrt(sw2ff - 2.0 * is_mean * sw2f + is_mean * is_mean * sw2) / sw;
  std::vector<double> top(d0.size());
  for (Eigen::Index r = 0; r < d0.size(); ++r) top[r] = d0.sorted_lambda(r, 0);
  const auto g = batch_mean_se(top);
  CHECK(std::abs(g.mean - is_mean) < 3.0 * std::hypot(g.se, is_se));
}
