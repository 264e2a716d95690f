#include "spikedcov/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "spikedcov/parallel.hpp"
#include "spikedcov/sampler.hpp"

namespace spikedcov {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2;

// Integral of 2 exp(c sin^2 u) * g(u) over [lo, hi]. The mass sits within a
// few multiples of |c|^{-1/2} of u = 0, so that region is integrated separately.
template <class G>
double kernel_integral(double c, double lo, double hi, G g) {
  using boost::math::quadrature::gauss_kronrod;
  auto f = [&](double u) {
    const double s = std::sin(u);
    return 2.0 * std::exp(c * s * s) * g(u);
  };
  if (hi <= lo) return 0.0;
  const double split = std::min(kHalfPi, 40.0 / std::sqrt(std::max(1.0, -c)));
  double total = 0.0;
  if (lo < split) total += gauss_kronrod<double, 61>::integrate(f, lo, std::min(hi, split), 10, 1e-13);
  // Past the split the integrand is below exp(-1600) relative to the peak when
  // |c| is large; skip it rather than chase a relative tolerance on zero.
  const double tail_floor = c * std::sin(split) * std::sin(split);
  if (hi > split && tail_floor > -700.0)
    total += gauss_kronrod<double, 61>::integrate(f, std::max(lo, split), hi, 10, 1e-13);
  return total;
}

void require_tilt(double c) {
  if (!(c <= 0.0)) throw DomainError("tilted Beta(1/2,1/2): tilt c must be <= 0");
}

double normalizer(double c) {
  return kernel_integral(c, 0.0, kHalfPi, [](double) { return 1.0; });
}

// I1(x) / I0(x) for x >= 0.
double bessel_ratio(double x) {
  if (x == 0.0) return 0.0;
  if (x <= 700.0) return std::cyl_bessel_i(1.0, x) / std::cyl_bessel_i(0.0, x);
  // I_v / I_{v-1} = 1 / (2v/x + I_{v+1} / I_v), evaluated backward from deep in the tail.
  const auto depth = static_cast<long>(std::min(2.0 * x + 200.0, 5e6));
  double tail = 0.0;
  for (long v = depth; v >= 1; --v) tail = 1.0 / (2.0 * static_cast<double>(v) / x + tail);
  return tail;
}

}  // namespace

double tilted_beta_bessel_mean(double c) {
  require_tilt(c);
  return 0.5 - 0.5 * bessel_ratio(-0.5 * c);
}

TiltedBetaReference tilted_beta_reference(double c) {
  require_tilt(c);
  TiltedBetaReference ref;
  ref.c = c;
  ref.normalizer = normalizer(c);
  ref.mean = kernel_integral(c, 0.0, kHalfPi, [](double u) {
               const double s = std::sin(u);
               return s * s;
             }) /
             ref.normalizer;
  ref.bessel_mean = tilted_beta_bessel_mean(c);
  constexpr int kGrid = 512;
  ref.grid_alpha.resize(kGrid);
  ref.grid_cdf.resize(kGrid);
  double acc = 0.0;
  double prev_u = 0.0;
  for (int m = 0; m < kGrid; ++m) {
    const double u = kHalfPi * static_cast<double>(m) / (kGrid - 1);
    acc += kernel_integral(c, prev_u, u, [](double) { return 1.0; });
    prev_u = u;
    const double s = std::sin(u);
    ref.grid_alpha[m] = s * s;
    ref.grid_cdf[m] = std::min(1.0, acc / ref.normalizer);
  }
  ref.grid_alpha.back() = 1.0;
  ref.grid_cdf.back() = 1.0;
  return ref;
}

double tilted_beta_cdf(double c, double alpha) {
  require_tilt(c);
  if (alpha <= 0.0) return 0.0;
  if (alpha >= 1.0) return 1.0;
  const double u = std::asin(std::sqrt(alpha));
  return kernel_integral(c, 0.0, u, [](double) { return 1.0; }) / normalizer(c);
}

double tilted_beta_quantile(double c, double q) {
  require_tilt(c);
  if (q <= 0.0) return 0.0;
  if (q >= 1.0) return 1.0;
  const double z = normalizer(c);
  double lo = 0.0;
  double hi = kHalfPi;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (kernel_integral(c, 0.0, mid, [](double) { return 1.0; }) / z < q) lo = mid;
    else hi = mid;
  }
  const double s = std::sin(0.5 * (lo + hi));
  return s * s;
}

double chi_square_sf(double statistic, double dof) {
  return boost::math::gamma_q(0.5 * dof, 0.5 * statistic);
}

GoodnessOfFit tilted_beta_gof(const std::vector<double>& samples, double c, int bins) {
  if (bins < 2) throw DomainError("tilted_beta_gof: need at least 2 bins");
  if (samples.empty()) throw InputError("tilted_beta_gof: no samples");
  std::vector<double> edges;
  for (int b = 1; b < bins; ++b) edges.push_back(tilted_beta_quantile(c, static_cast<double>(b) / bins));
  GoodnessOfFit g;
  g.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double s : samples) {
    const auto bin = std::upper_bound(edges.begin(), edges.end(), s) - edges.begin();
    ++g.counts[static_cast<std::size_t>(bin)];
  }
  const double expected = static_cast<double>(samples.size()) / bins;
  for (long count : g.counts) g.statistic += (count - expected) * (count - expected) / expected;
  g.p_value = chi_square_sf(g.statistic, bins - 1.0);
  return g;
}

namespace {

// Streaming self-normalized importance-sampling moments in the log domain.
class WeightedMoments {
 public:
  explicit WeightedMoments(std::size_t dims) : s1_(dims, 0.0), s2f_(dims, 0.0), s2ff_(dims, 0.0) {}

  void add(double log_w, const std::vector<double>& f) {
    if (log_w > shift_) {
      const double scale = std::exp(shift_ - log_w);  // 0 on the first call
      rescale(scale);
      shift_ = log_w;
    }
    const double w = std::exp(log_w - shift_);
    s0_ += w;
    w2_ += w * w;
    for (std::size_t d = 0; d < f.size(); ++d) {
      s1_[d] += w * f[d];
      s2f_[d] += w * w * f[d];
      s2ff_[d] += w * w * f[d] * f[d];
    }
  }

  double ess() const { return s0_ * s0_ / w2_; }

  WeightedEstimate estimate(std::size_t d) const {
    const double mean = s1_[d] / s0_;
    // Delta-method variance: sum w^2 (f - mean)^2 / (sum w)^2.
    const double num = s2ff_[d] - 2.0 * mean * s2f_[d] + mean * mean * w2_;
    return {mean, std::sqrt(std::max(0.0, num)) / s0_};
  }

 private:
  void rescale(double scale) {
    s0_ *= scale;
    w2_ *= scale * scale;
    for (std::size_t d = 0; d < s1_.size(); ++d) {
      s1_[d] *= scale;
      s2f_[d] *= scale * scale;
      s2ff_[d] *= scale * scale;
    }
  }

  double shift_ = -std::numeric_limits<double>::infinity();
  double s0_ = 0.0;
  double w2_ = 0.0;
  std::vector<double> s1_, s2f_, s2ff_;
};

}  // namespace

PosteriorOracleResult is_posterior_oracle(const SampleSpectrum& ss, const PriorConfig& cfg,
                                          long n_samples, Rng& rng, int inner_draws) {
  if (cfg.b != 1) throw ConfigError("is_posterior_oracle: requires b = 1");
  if (cfg.p() != ss.p) throw ConfigError("is_posterior_oracle: prior dimension does not match");
  if (n_samples < 1 || inner_draws < 1) throw ConfigError("is_posterior_oracle: need positive sample counts");
  const Eigen::Index p = ss.p;
  const auto pu = static_cast<std::size_t>(p);
  const double n = static_cast<double>(ss.n);
  const VectorXd shape = cfg.a.array() + 0.5 * n - 1.0;
  const VectorXd divisor = n + 2.0 * cfg.a.array() - 4.0;
  const VectorXd scale = posterior_scale_diag(ss, cfg.h);
  const MatrixXd& q = ss.q.matrix();

  // Layout of f: [sorted lambda (p) | vector error (p) | unordered lambda (p)].
  WeightedMoments moments(3 * pu);
  std::vector<double> f(3 * pu);
  VectorXd lambda(p);
  for (long s = 0; s < n_samples; ++s) {
    const OrthoMatrix gamma = haar_sample(p, rng);
    const VectorXd c = gamma.matrix().array().square().matrix().transpose() * scale;
    const double log_w = -(shape.array() * c.array().log()).sum();
    std::fill(f.begin(), f.end(), 0.0);
    const MatrixXd u = q * gamma.matrix();
    for (int m = 0; m < inner_draws; ++m) {
      for (Eigen::Index i = 0; i < p; ++i) lambda(i) = inverse_gamma(rng, shape(i), 0.5 * c(i));
      const auto order = descending_order(lambda);
      for (std::size_t j = 0; j < pu; ++j) {
        const Eigen::Index col = order[j];
        f[j] += lambda(col);
        const double dot = u(static_cast<Eigen::Index>(j), col);  // e_j^T u_col
        f[pu + j] += 1.0 - dot * dot;
      }
    }
    for (std::size_t j = 0; j < 2 * pu; ++j) f[j] /= inner_draws;
    for (std::size_t j = 0; j < pu; ++j) f[2 * pu + j] = c(static_cast<Eigen::Index>(j)) / divisor(static_cast<Eigen::Index>(j));
    moments.add(log_w, f);
  }

  PosteriorOracleResult out;
  out.samples = n_samples;
  out.ess = moments.ess();
  if (out.ess < 100.0)
    throw UnreliableOracleError("is_posterior_oracle: effective sample size " + std::to_string(out.ess) +
                                " is below 100");
  for (std::size_t j = 0; j < pu; ++j) {
    out.sorted_lambda.push_back(moments.estimate(j));
    out.vector_error.push_back(moments.estimate(pu + j));
    out.unordered_lambda.push_back(moments.estimate(2 * pu + j));
  }
  return out;
}

double ValidationTarget::d(Eigen::Index j) const {
  return static_cast<double>(p) / (static_cast<double>(n) * spikes(j));
}

double ValidationTarget::dbar() const { return base; }

LemmaCheck lemma_asymptotics_check(const ValidationTarget& vt, long reps, std::uint64_t seed,
                                   unsigned threads) {
  LemmaCheck out;
  const Eigen::Index k = vt.spikes.size();
  if (k == 0) {
    out.skipped = true;
    out.message = "no spiked eigenvalues: nothing to check";
    return out;
  }
  if (reps < 2) throw ConfigError("lemma_asymptotics_check: need at least 2 replications");
  SpikedScenario sc{vt.n, vt.p, vt.spikes, vt.base, std::nullopt};
  sc.validate();

  MatrixXd ratio(reps, k);
  MatrixXd align(reps, k);
  parallel_for(static_cast<std::size_t>(reps), threads, [&](std::size_t r) {
    Rng rng(derive_seed(seed, r));
    const DataMatrix x = gen_spiked_data(sc, rng);
    const LeadingEigen lead = leading_sample_eigen(x, k);
    for (Eigen::Index j = 0; j < k; ++j) {
      ratio(static_cast<Eigen::Index>(r), j) = lead.values(j) / vt.spikes(j);
      align(static_cast<Eigen::Index>(r), j) = std::abs(lead.vectors(j, j));
    }
  });
  auto summarize = [&](const MatrixXd& m, Eigen::Index j) {
    const double mean = m.col(j).mean();
    const double var = (m.col(j).array() - mean).square().sum() / static_cast<double>(reps - 1);
    return WeightedEstimate{mean, std::sqrt(var / static_cast<double>(reps))};
  };
  for (Eigen::Index j = 0; j < k; ++j) {
    LemmaRow row;
    row.j = j + 1;
    row.ratio = summarize(ratio, j);
    row.alignment = summarize(align, j);
    row.predicted_ratio = vt.predicted_ratio(j);
    row.predicted_alignment = vt.predicted_alignment(j);
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace spikedcov
