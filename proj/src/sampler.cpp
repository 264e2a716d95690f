#include "spikedcov/sampler.hpp"

#include <algorithm>
#include <iomanip>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

namespace spikedcov {

void McmcSettings::validate() const {
  if (burn_in < 0) throw ConfigError("McmcSettings: burn_in must be >= 0");
  if (draws <= 0) throw ConfigError("McmcSettings: draws must be positive");
  if (thin <= 0) throw ConfigError("McmcSettings: thin must be positive");
  if (reorth_every <= 0) throw ConfigError("McmcSettings: reorth_every must be positive");
  if (draws / thin < 1) throw ConfigError("McmcSettings: draws / thin must be at least 1");
  if (schedule.kind == PairSchedule::Kind::kRandomScan && schedule.pairs_per_sweep <= 0)
    throw ConfigError("McmcSettings: random scan needs a positive pair count");
}

VectorXd posterior_scale_diag(const SampleSpectrum& ss, double h) {
  return ss.w().array() + h;
}

VectorXd compute_c(const RowMatrixXd& gamma, const VectorXd& scale_diag) {
  return gamma.array().square().matrix().transpose() * scale_diag;
}

VectorXd compute_c(const Eigen::Ref<const MatrixXd>& gamma, const SampleSpectrum& ss, double h) {
  if (gamma.rows() != ss.p || gamma.cols() != ss.p) throw InputError("compute_c: dimension mismatch");
  return gamma.array().square().matrix().transpose() * posterior_scale_diag(ss, h);
}

ChainState initial_state(const SampleSpectrum& ss, const PriorConfig& cfg) {
  if (cfg.p() != ss.p) throw ConfigError("initial_state: prior dimension does not match data");
  ChainState st;
  st.gamma = RowMatrixXd::Identity(ss.p, ss.p);
  st.c = compute_c(st.gamma, posterior_scale_diag(ss, cfg.h));
  const double n = static_cast<double>(ss.n);
  st.lambda = st.c.array() / (n + 2.0 * cfg.a.array() - 4.0);
  return st;
}

double repulsion_log_ratio(const VectorXd& lambda, Eigen::Index i, double proposal) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < lambda.size(); ++j) {
    if (j == i) continue;
    acc += std::log(std::abs(proposal - lambda(j))) - std::log(std::abs(lambda(i) - lambda(j)));
  }
  return acc;
}

long sample_lambda_step(ChainState& state, const PriorConfig& cfg, Eigen::Index n, Rng& rng) {
  const Eigen::Index p = state.lambda.size();
  const double half_n = 0.5 * static_cast<double>(n);
  long accepted = 0;
  for (Eigen::Index i = 0; i < p; ++i) {
    if (!(state.c(i) > 0.0)) throw InvariantError("sample_lambda_step: nonpositive c_i");
    const double draw = inverse_gamma(rng, cfg.a(i) + half_n - 1.0, 0.5 * state.c(i));
    if (cfg.b == 1) {
      state.lambda(i) = draw;
      ++accepted;
      continue;
    }
    const double log_ratio = repulsion_log_ratio(state.lambda, i, draw);
    if (log_ratio >= 0.0 || std::log(uniform01(rng)) < log_ratio) {
      state.lambda(i) = draw;
      ++accepted;
    }
  }
  return accepted;
}

double sample_tilted_beta_reference(double c, Rng& rng) {
  if (c > 0.0) throw DomainError("sample_tilted_beta: tilt must be <= 0");
  for (;;) {
    const double s = std::sin(0.5 * std::numbers::pi * uniform01(rng));
    const double alpha = s * s;
    if (c == 0.0 || uniform01(rng) < std::exp(c * alpha)) return alpha;
  }
}

double sample_tilted_beta(double c, Rng& rng) {
  if (!(c <= 0.0)) throw DomainError("sample_tilted_beta: tilt must be <= 0");
  if (c >= -1.0) return sample_tilted_beta_reference(c, rng);
  // With psi = 2 (theta + omega) - pi the angle is von Mises with concentration
  // |c|/2 and alpha = cos^2(theta + omega) = (1 - cos psi) / 2.
  const VonMisesDraw v = von_mises(rng, -0.5 * c);
  return std::clamp(0.5 * v.one_minus_cos, std::numeric_limits<double>::min(), 1.0);
}

namespace {

double wrap_half_pi(double theta) {
  constexpr double pi = std::numbers::pi;
  while (theta <= -pi / 2) theta += pi;
  while (theta > pi / 2) theta -= pi;
  return theta;
}

}  // namespace

PairUpdate sample_pair_rotation(ChainState& state, Eigen::Index i, Eigen::Index j,
                                const VectorXd& scale_diag, Rng& rng) {
  if (!(i < j)) throw IndexError("sample_pair_rotation: need i < j");
  auto& g = state.gamma;
  const Eigen::Index p = g.cols();
  const double* gi = g.row(i).data();
  const double* gj = g.row(j).data();
  const double* lam = state.lambda.data();

  double a11 = 0.0, a12 = 0.0, a22 = 0.0;
  for (Eigen::Index l = 0; l < p; ++l) {
    if (!(lam[l] > 0.0)) throw InvariantError("sample_pair_rotation: nonpositive eigenvalue");
    const double inv = 1.0 / lam[l];
    a11 += gi[l] * gi[l] * inv;
    a12 += gi[l] * gj[l] * inv;
    a22 += gj[l] * gj[l] * inv;
  }
  const TwoByTwoEig e = eig2x2_with_angle(a11, a12, a22);
  const double h1 = scale_diag(i);
  const double h2 = scale_diag(j);

  PairUpdate u{};
  u.s1 = e.s1;
  u.s2 = e.s2;
  u.omega = e.omega;
  u.tilt = -0.5 * std::abs((e.s1 - e.s2) * (h1 - h2));
  double alpha = sample_tilted_beta(u.tilt, rng);
  // The conditional is exp(-1/2 (h1 - h2)(s1 - s2) cos^2(theta + omega)); when
  // h1 < h2 the tilt acts on sin^2 instead.
  if (h1 < h2) alpha = 1.0 - alpha;
  u.alpha = alpha;
  double phi = std::acos(std::sqrt(std::clamp(alpha, 0.0, 1.0)));
  if (random_sign(rng) < 0) phi = -phi;
  u.theta = wrap_half_pi(phi - e.omega);
  u.eps1 = random_sign(rng);
  u.eps2 = random_sign(rng);

  const double ct = std::cos(u.theta);
  const double st = std::sin(u.theta);
  double* ri = g.row(i).data();
  double* rj = g.row(j).data();
  double* c = state.c.data();
  for (Eigen::Index l = 0; l < p; ++l) {
    const double oi = ri[l];
    const double oj = rj[l];
    const double ni = u.eps1 * (ct * oi - st * oj);
    const double nj = u.eps2 * (st * oi + ct * oj);
    c[l] += h1 * (ni * ni - oi * oi) + h2 * (nj * nj - oj * oj);
    ri[l] = ni;
    rj[l] = nj;
  }
  return u;
}

namespace {

void pair_pass(ChainState& state, const PairSchedule& schedule, const VectorXd& scale_diag, Rng& rng) {
  const Eigen::Index p = state.gamma.rows();
  if (schedule.kind == PairSchedule::Kind::kFullLexicographic) {
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = i + 1; j < p; ++j) sample_pair_rotation(state, i, j, scale_diag, rng);
    return;
  }
  std::uniform_int_distribution<Eigen::Index> pick(0, p - 1);
  for (Eigen::Index m = 0; m < schedule.pairs_per_sweep; ++m) {
    Eigen::Index i = pick(rng);
    Eigen::Index j = pick(rng);
    while (j == i) j = pick(rng);
    if (i > j) std::swap(i, j);
    sample_pair_rotation(state, i, j, scale_diag, rng);
  }
}

}  // namespace

void gibbs_sweep(ChainState& state, const PairSchedule& schedule, const PriorConfig& cfg,
                 const SampleSpectrum& ss, const VectorXd& scale_diag, Rng& rng) {
  sample_lambda_step(state, cfg, ss.n, rng);
  pair_pass(state, schedule, scale_diag, rng);
}

std::vector<Eigen::Index> descending_order(const VectorXd& lambda) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(lambda.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index l, Eigen::Index r) { return lambda(l) > lambda(r); });
  return order;
}

MatrixXd recover_eigenvectors(const SampleSpectrum& ss, const RowMatrixXd& gamma,
                              const std::vector<Eigen::Index>& columns) {
  MatrixXd out(ss.p, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t m = 0; m < columns.size(); ++m) {
    VectorXd v = ss.q.matrix() * gamma.col(columns[m]);
    out.col(static_cast<Eigen::Index>(m)) = v / v.norm();
  }
  return out;
}

PosteriorDraws run_chain(const SampleSpectrum& ss, const PriorConfig& cfg, const McmcSettings& ms,
                         const DataMatrix* x) {
  ms.validate();
  cfg.validate();
  if (cfg.p() != ss.p) throw ConfigError("run_chain: prior dimension does not match data");
  if (cfg.k > ss.p) throw ConfigError("run_chain: k exceeds p");
  if (x && (x->p() != ss.p || x->n() != ss.n)) throw InputError("run_chain: data do not match spectrum");

  Rng rng(ms.seed);
  const VectorXd scale = posterior_scale_diag(ss, cfg.h);
  ChainState st = initial_state(ss, cfg);
  const Eigen::Index p = ss.p;
  const long kept = ms.retained();

  PosteriorDraws out;
  out.settings = ms;
  out.k = cfg.k;
  out.sorted_lambda.resize(kept, p);
  out.top_vectors.reserve(static_cast<std::size_t>(kept));
  MatrixXd rotated_data;  // X Q, so that U^T x_i = Gamma^T (Q^T x_i)
  if (x) {
    out.loglik.resize(kept, x->n());
    rotated_data = x->values() * ss.q.matrix();
  }
  const double log_2pi = std::log(2.0 * std::numbers::pi);

  long accepted = 0;
  long proposed = 0;
  const long total = ms.burn_in + ms.draws;
  long stored = 0;
  for (long sweep = 1; sweep <= total; ++sweep) {
    accepted += sample_lambda_step(st, cfg, ss.n, rng);
    proposed += p;
    pair_pass(st, ms.schedule, scale, rng);
    if (sweep % ms.reorth_every == 0) {
      out.max_orthogonality_defect =
          std::max(out.max_orthogonality_defect, orthogonality_defect(MatrixXd(st.gamma)));
      st.gamma = reorthonormalize(MatrixXd(st.gamma)).matrix();
      st.c = compute_c(st.gamma, scale);
    }
    const long post = sweep - ms.burn_in;
    if (post <= 0 || post % ms.thin != 0 || stored >= kept) continue;

    const auto order = descending_order(st.lambda);
    for (Eigen::Index m = 0; m < p; ++m) out.sorted_lambda(stored, m) = st.lambda(order[m]);
    out.top_vectors.push_back(recover_eigenvectors(
        ss, st.gamma, std::vector<Eigen::Index>(order.begin(), order.begin() + cfg.k)));
    if (x) {
      const MatrixXd z = rotated_data * st.gamma;
      const double log_det = st.lambda.array().log().sum();
      const VectorXd inv = st.lambda.cwiseInverse();
      const VectorXd quad = z.array().square().matrix() * inv;
      out.loglik.row(stored) =
          (-0.5 * (quad.array() + static_cast<double>(p) * log_2pi + log_det)).transpose();
    }
    ++stored;
  }
  out.lambda_acceptance = proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 1.0;
  return out;
}

void to_json(nlohmann::json& j, const McmcSettings& ms) {
  j = nlohmann::json{{"burn_in", ms.burn_in},
                     {"draws", ms.draws},
                     {"thin", ms.thin},
                     {"reorth_every", ms.reorth_every},
                     {"seed", ms.seed}};
  if (ms.schedule.kind == PairSchedule::Kind::kFullLexicographic) {
    j["pair_schedule"] = "full_lexicographic";
  } else {
    j["pair_schedule"] = "random_scan";
    j["pairs_per_sweep"] = ms.schedule.pairs_per_sweep;
  }
}

void from_json(const nlohmann::json& j, McmcSettings& ms) {
  ms.burn_in = j.at("burn_in").get<long>();
  ms.draws = j.at("draws").get<long>();
  ms.thin = j.at("thin").get<long>();
  ms.reorth_every = j.at("reorth_every").get<long>();
  ms.seed = j.at("seed").get<std::uint64_t>();
  if (j.at("pair_schedule").get<std::string>() == "random_scan")
    ms.schedule = PairSchedule::random_scan(j.at("pairs_per_sweep").get<Eigen::Index>());
  else
    ms.schedule = PairSchedule::full();
}

nlohmann::json draws_summary(const PosteriorDraws& d) {
  const VectorXd mean = d.sorted_lambda.colwise().mean();
  return nlohmann::json{{"settings", d.settings},
                        {"retained_draws", d.size()},
                        {"p", d.sorted_lambda.cols()},
                        {"k", d.k},
                        {"lambda_acceptance", d.lambda_acceptance},
                        {"max_orthogonality_defect", d.max_orthogonality_defect},
                        {"posterior_mean_sorted_lambda", std::vector<double>(mean.begin(), mean.end())}};
}

void write_draws_csv(const PosteriorDraws& d, std::ostream& out) {
  const Eigen::Index p = d.sorted_lambda.cols();
  for (Eigen::Index m = 0; m < p; ++m) out << (m ? "," : "") << "lambda_" << m + 1;
  for (Eigen::Index v = 0; v < d.k; ++v)
    for (Eigen::Index m = 0; m < p; ++m) out << ",xi" << v + 1 << "_" << m + 1;
  out << '\n' << std::setprecision(17);
  for (Eigen::Index r = 0; r < d.size(); ++r) {
    for (Eigen::Index m = 0; m < p; ++m) out << (m ? "," : "") << d.sorted_lambda(r, m);
    const MatrixXd& vecs = d.top_vectors[static_cast<std::size_t>(r)];
    for (Eigen::Index v = 0; v < vecs.cols(); ++v)
      for (Eigen::Index m = 0; m < p; ++m) out << ',' << vecs(m, v);
    out << '\n';
  }
}

}  // namespace spikedcov
