#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "spikedcov/sampler.hpp"

namespace spikedcov {

enum class Method { kSample, kGsiw, kGiw, kSiw, kIw, kSpoet };

std::string to_string(Method m);
Method parse_method(const std::string& name);  // "sample", "gsiw", "giw", "siw", "iw", "spoet"
std::vector<Method> all_methods();
bool is_bayesian(Method m);

/// |truth - est| / truth.
double err_lambda(double est, double truth);
/// 1 - (est . truth)^2 for unit vectors.
double err_xi(const Eigen::Ref<const VectorXd>& est, const Eigen::Ref<const VectorXd>& truth);

struct Coverage {
  double cp = 0.0;
  double il = 0.0;
};
Coverage coverage_and_length(const std::vector<std::pair<double, double>>& intervals, double truth);

/// Metrics of one method on one replication. Empty vectors when the method failed.
struct RepMetrics {
  long rep = 0;
  Method method = Method::kSample;
  std::optional<std::string> error;
  std::vector<double> estimate;
  std::vector<double> err_lambda;
  std::vector<double> err_xi;
  std::vector<std::pair<double, double>> intervals;  // empty for the sample estimator

  bool operator==(const RepMetrics&) const = default;
};

struct IndexAggregate {
  Eigen::Index index = 0;  // 1-based eigenvalue index
  double truth = 0.0;
  double mean_err_lambda = 0.0;
  double mean_err_xi = 0.0;
  std::optional<double> cp;       // absent for methods without intervals
  std::optional<double> mean_il;
  long count = 0;                 // successful replications

  bool operator==(const IndexAggregate&) const = default;
};

struct MethodAggregate {
  Method method = Method::kSample;
  long failures = 0;
  std::vector<IndexAggregate> per_index;

  bool operator==(const MethodAggregate&) const = default;
};

struct ScenarioDescriptor {
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  std::vector<double> spikes;
  double base = 1.0;
  bool rotated = false;

  bool operator==(const ScenarioDescriptor&) const = default;
};

struct SimReport {
  ScenarioDescriptor scenario;
  long reps = 0;
  std::uint64_t base_seed = 0;
  McmcSettings mcmc;
  std::vector<MethodAggregate> methods;
  std::vector<RepMetrics> raw;  // rep-major, methods in request order
  std::optional<double> wall_seconds;

  bool operator==(const SimReport& o) const;
};

struct BenchOptions {
  std::vector<Method> methods = all_methods();
  long reps = 20;
  McmcSettings mcmc;
  std::uint64_t base_seed = 0;
  unsigned threads = 1;
  bool timing = false;
};

/// Replication r draws data with derive_seed(base_seed, r); every method sees
/// the same data. Method failures are recorded in the report, not thrown.
SimReport run_case(const SpikedScenario& sc, const BenchOptions& opt);

/// Metrics for one method on one data set.
RepMetrics evaluate_method(Method m, const SpikedScenario& sc, const SampleSpectrum& ss,
                           const McmcSettings& ms);

/// Recompute aggregates from raw per-replication metrics.
std::vector<MethodAggregate> aggregate(const SpikedScenario& sc, const std::vector<Method>& methods,
                                       const std::vector<RepMetrics>& raw);

void to_json(nlohmann::json& j, const SimReport& r);
void from_json(const nlohmann::json& j, SimReport& r);

/// One row per (n, eigenvalue index); columns n, index, truth, then
/// <method>_err_lambda, <method>_err_xi, <method>_cp, <method>_il per method.
/// All reports must share the method list.
void write_report_csv(const std::vector<SimReport>& reports, std::ostream& out);
std::string report_csv_header(const std::vector<Method>& methods);

}  // namespace spikedcov
