#include "spikedcov/prior.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

namespace spikedcov {

void PriorConfig::validate(Eigen::Index rank_bound) const {
  if (a.size() < 1) throw ConfigError("PriorConfig: empty shape vector");
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (!(a(i) > 2.0)) {
      std::ostringstream msg;
      msg << "PriorConfig: a[" << i + 1 << "] = " << a(i) << " must exceed 2";
      throw ConfigError(msg.str());
    }
    if (i > 0 && a(i) < a(i - 1)) throw ConfigError("PriorConfig: shapes must be nondecreasing");
  }
  if (b != 0 && b != 1) throw ConfigError("PriorConfig: b must be 0 or 1");
  if (!(h > 0.0)) throw ConfigError("PriorConfig: h must be positive");
  if (k < 0) throw ConfigError("PriorConfig: k must be nonnegative");
  if (rank_bound >= 0 && k >= rank_bound) throw ConfigError("PriorConfig: need k < n^p");
}

double nonspiked_mean(const SampleSpectrum& ss, Eigen::Index k) {
  const Eigen::Index r = ss.rank_bound();
  if (k < 0 || k >= r) throw ConfigError("nonspiked_mean: need 0 <= k < n^p");
  return ss.eigenvalues.segment(k, r - k).mean();
}

namespace {

PriorConfig data_driven(const SampleSpectrum& ss, Eigen::Index k, int b) {
  const Eigen::Index r = ss.rank_bound();
  if (k < 1 || k >= r) throw ConfigError("data-driven prior: need 1 <= k < n^p");
  const double t = nonspiked_mean(ss, k);
  const double n = static_cast<double>(ss.n);
  const double p = static_cast<double>(ss.p);

  PriorConfig cfg;
  cfg.a.resize(ss.p);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double gap = ss.eigenvalues(i) - t;
    if (!(gap > 0.0)) {
      std::ostringstream msg;
      msg << "data-driven prior: sample eigenvalue " << i + 1 << " (" << ss.eigenvalues(i)
          << ") does not exceed the non-spiked mean t = " << t;
      throw ConfigError(msg.str());
    }
    cfg.a(i) = n * t / (2.0 * gap) + 2.0;
  }
  const double bulk = std::max(p / 2.0, cfg.a(k - 1));
  cfg.a.segment(k, r - k).setConstant(bulk);
  if (ss.p > r) cfg.a.tail(ss.p - r).setConstant(std::max(2.0 * p, bulk));
  cfg.b = b;
  cfg.h = 4.0;
  cfg.k = k;
  cfg.validate(r);
  return cfg;
}

}  // namespace

PriorConfig gsiw_data_driven(const SampleSpectrum& ss, Eigen::Index k) { return data_driven(ss, k, 1); }

PriorConfig giw_data_driven(const SampleSpectrum& ss, Eigen::Index k) { return data_driven(ss, k, 0); }

PriorConfig siw_fixed(Eigen::Index p, Eigen::Index k) {
  PriorConfig cfg{VectorXd::Constant(p, 4.0), 1, 4.0, k};
  cfg.validate();
  return cfg;
}

PriorConfig iw_fixed(Eigen::Index p, Eigen::Index k) {
  PriorConfig cfg{VectorXd::Constant(p, static_cast<double>(p) + 1.0), 0, 1.0, k};
  cfg.validate();
  return cfg;
}

std::vector<std::string> validate_assumptions(const SpikedScenario& sc) {
  std::vector<std::string> warnings;
  const double n = static_cast<double>(sc.n);
  const double p = static_cast<double>(sc.p);
  // "n/p small": flag anything that is not clearly high-dimensional.
  if (n / p > 0.5) {
    std::ostringstream msg;
    msg << "A1: n/p = " << n / p << " is not small (high-dimensional regime expected)";
    warnings.push_back(msg.str());
  }
  for (Eigen::Index j = 0; j < sc.k(); ++j) {
    const double next = j + 1 < sc.k() ? sc.spikes(j + 1) : sc.base;
    const double gap = (sc.spikes(j) - next) / sc.spikes(j);
    if (gap < 0.1) {
      std::ostringstream msg;
      msg << "A3: relative gap after spike " << j + 1 << " is " << gap << " (< 0.1)";
      warnings.push_back(msg.str());
    }
    const double d = p / (n * sc.spikes(j));
    if (d > 10.0) {
      std::ostringstream msg;
      msg << "A4: d_" << j + 1 << " = p/(n lambda) = " << d << " exceeds 10";
      warnings.push_back(msg.str());
    }
  }
  return warnings;
}

void to_json(nlohmann::json& j, const PriorConfig& cfg) {
  j = nlohmann::json{{"a", std::vector<double>(cfg.a.begin(), cfg.a.end())},
                     {"b", cfg.b},
                     {"h", cfg.h},
                     {"k", cfg.k}};
}

void from_json(const nlohmann::json& j, PriorConfig& cfg) {
  const auto a = j.at("a").get<std::vector<double>>();
  cfg.a = Eigen::Map<const VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
  cfg.b = j.at("b").get<int>();
  cfg.h = j.at("h").get<double>();
  cfg.k = j.at("k").get<Eigen::Index>();
  cfg.validate();
}

}  // namespace spikedcov
