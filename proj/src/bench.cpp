#include "spikedcov/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>

#include <nlohmann/json.hpp>

#include "spikedcov/estimators.hpp"
#include "spikedcov/parallel.hpp"

namespace spikedcov {

std::string to_string(Method m) {
  switch (m) {
    case Method::kSample: return "sample";
    case Method::kGsiw: return "gsiw";
    case Method::kGiw: return "giw";
    case Method::kSiw: return "siw";
    case Method::kIw: return "iw";
    case Method::kSpoet: return "spoet";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : all_methods())
    if (to_string(m) == name) return m;
  throw ConfigError("unknown method '" + name + "' (expected sample, gsiw, giw, siw, iw or spoet)");
}

std::vector<Method> all_methods() {
  return {Method::kSample, Method::kGsiw, Method::kGiw, Method::kSiw, Method::kIw, Method::kSpoet};
}

bool is_bayesian(Method m) { return m != Method::kSample && m != Method::kSpoet; }

double err_lambda(double est, double truth) {
  if (!(truth > 0.0)) throw DomainError("err_lambda: true eigenvalue must be positive");
  return std::abs(truth - est) / truth;
}

double err_xi(const Eigen::Ref<const VectorXd>& est, const Eigen::Ref<const VectorXd>& truth) {
  if (est.size() != truth.size()) throw InputError("err_xi: dimension mismatch");
  if (std::abs(est.norm() - 1.0) > 1e-6 || std::abs(truth.norm() - 1.0) > 1e-6)
    throw DomainError("err_xi: vectors must have unit norm");
  const double dot = est.dot(truth);
  return std::clamp(1.0 - dot * dot, 0.0, 1.0);
}

Coverage coverage_and_length(const std::vector<std::pair<double, double>>& intervals, double truth) {
  if (intervals.empty()) throw InputError("coverage_and_length: no intervals");
  double hits = 0.0;
  double length = 0.0;
  for (const auto& [lo, hi] : intervals) {
    if (lo <= truth && truth <= hi) hits += 1.0;
    length += hi - lo;
  }
  const auto count = static_cast<double>(intervals.size());
  return {hits / count, length / count};
}

namespace {

PriorConfig prior_for(Method m, const SampleSpectrum& ss, Eigen::Index k) {
  switch (m) {
    case Method::kGsiw: return gsiw_data_driven(ss, k);
    case Method::kGiw: return giw_data_driven(ss, k);
    case Method::kSiw: return siw_fixed(ss.p, k);
    case Method::kIw: return iw_fixed(ss.p, k);
    default: break;
  }
  throw ConfigError("prior_for: method has no prior");
}

std::uint64_t method_stream(Method m) { return 1 + static_cast<std::uint64_t>(m); }

}  // namespace

RepMetrics evaluate_method(Method m, const SpikedScenario& sc, const SampleSpectrum& ss,
                           const McmcSettings& ms) {
  const Eigen::Index k = sc.k();
  RepMetrics out;
  out.method = m;
  VectorXd values(k);
  MatrixXd vectors;
  switch (m) {
    case Method::kSample:
      values = ss.eigenvalues.head(k);
      vectors = ss.q.matrix().leftCols(k);
      break;
    case Method::kSpoet: {
      const SpoetEstimate est = spoet(ss, k);
      values = est.values;
      out.intervals = est.intervals;
      vectors = ss.q.matrix().leftCols(k);
      break;
    }
    default: {
      const PosteriorDraws d = run_chain(ss, prior_for(m, ss, k), ms);
      const auto summary = summarize_eigenvalues(d, k);
      for (Eigen::Index i = 0; i < k; ++i) {
        values(i) = summary[static_cast<std::size_t>(i)].point;
        out.intervals.emplace_back(summary[static_cast<std::size_t>(i)].lo, summary[static_cast<std::size_t>(i)].hi);
      }
      vectors = estimate_eigenvectors(d, ss.q.matrix().leftCols(k));
      break;
    }
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    out.estimate.push_back(values(i));
    out.err_lambda.push_back(err_lambda(values(i), sc.spikes(i)));
    out.err_xi.push_back(err_xi(vectors.col(i), sc.true_eigenvector(i)));
  }
  return out;
}

std::vector<MethodAggregate> aggregate(const SpikedScenario& sc, const std::vector<Method>& methods,
                                       const std::vector<RepMetrics>& raw) {
  const Eigen::Index k = sc.k();
  std::vector<MethodAggregate> out;
  for (Method m : methods) {
    MethodAggregate agg;
    agg.method = m;
    for (Eigen::Index i = 0; i < k; ++i) {
      IndexAggregate ia;
      ia.index = i + 1;
      ia.truth = sc.spikes(i);
      std::vector<std::pair<double, double>> intervals;
      const auto iu = static_cast<std::size_t>(i);
      for (const RepMetrics& r : raw) {
        if (r.method != m || r.error) continue;
        ia.mean_err_lambda += r.err_lambda[iu];
        ia.mean_err_xi += r.err_xi[iu];
        if (!r.intervals.empty()) intervals.push_back(r.intervals[iu]);
        ++ia.count;
      }
      if (ia.count > 0) {
        ia.mean_err_lambda /= static_cast<double>(ia.count);
        ia.mean_err_xi /= static_cast<double>(ia.count);
      }
      if (!intervals.empty()) {
        const Coverage cov = coverage_and_length(intervals, ia.truth);
        ia.cp = cov.cp;
        ia.mean_il = cov.il;
      }
      agg.per_index.push_back(ia);
    }
    for (const RepMetrics& r : raw) agg.failures += (r.method == m && r.error) ? 1 : 0;
    out.push_back(std::move(agg));
  }
  return out;
}

SimReport run_case(const SpikedScenario& sc, const BenchOptions& opt) {
  sc.validate();
  if (opt.methods.empty()) throw ConfigError("run_case: no methods requested");
  if (opt.reps < 1) throw ConfigError("run_case: need at least one replication");
  opt.mcmc.validate();
  const auto start = std::chrono::steady_clock::now();

  const std::size_t per_rep = opt.methods.size();
  std::vector<RepMetrics> raw(static_cast<std::size_t>(opt.reps) * per_rep);
  parallel_for(static_cast<std::size_t>(opt.reps), opt.threads, [&](std::size_t r) {
    const std::uint64_t data_seed = derive_seed(opt.base_seed, r);
    Rng rng(data_seed);
    const DataMatrix x = gen_spiked_data(sc, rng);
    const SampleSpectrum ss = sample_covariance(x);
    for (std::size_t mi = 0; mi < per_rep; ++mi) {
      const Method m = opt.methods[mi];
      McmcSettings ms = opt.mcmc;
      ms.seed = derive_seed(data_seed, method_stream(m));
      RepMetrics& slot = raw[r * per_rep + mi];
      try {
        slot = evaluate_method(m, sc, ss, ms);
      } catch (const Error& e) {
        slot = RepMetrics{};
        slot.method = m;
        slot.error = e.what();
      }
      slot.rep = static_cast<long>(r);
    }
  });

  SimReport report;
  report.scenario = {sc.n, sc.p, std::vector<double>(sc.spikes.begin(), sc.spikes.end()), sc.base,
                     sc.rotation.has_value()};
  report.reps = opt.reps;
  report.base_seed = opt.base_seed;
  report.mcmc = opt.mcmc;
  report.methods = aggregate(sc, opt.methods, raw);
  report.raw = std::move(raw);
  if (opt.timing)
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

bool SimReport::operator==(const SimReport& o) const {
  nlohmann::json a = mcmc, b = o.mcmc;
  return scenario == o.scenario && reps == o.reps && base_seed == o.base_seed && a == b &&
         methods == o.methods && raw == o.raw && wall_seconds == o.wall_seconds;
}

namespace {

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> read_optional(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

void to_json(nlohmann::json& j, const SimReport& r) {
  nlohmann::json methods = nlohmann::json::array();
  for (const auto& m : r.methods) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& ia : m.per_index)
      rows.push_back({{"index", ia.index},
                      {"truth", ia.truth},
                      {"err_lambda", ia.mean_err_lambda},
                      {"err_xi", ia.mean_err_xi},
                      {"cp", optional_number(ia.cp)},
                      {"il", optional_number(ia.mean_il)},
                      {"count", ia.count}});
    methods.push_back({{"method", to_string(m.method)}, {"failures", m.failures}, {"per_index", rows}});
  }
  nlohmann::json raw = nlohmann::json::array();
  for (const auto& rm : r.raw) {
    nlohmann::json e = {{"rep", rm.rep}, {"method", to_string(rm.method)}};
    if (rm.error) {
      e["error"] = *rm.error;
    } else {
      e["estimate"] = rm.estimate;
      e["err_lambda"] = rm.err_lambda;
      e["err_xi"] = rm.err_xi;
      nlohmann::json iv = nlohmann::json::array();
      for (const auto& [lo, hi] : rm.intervals) iv.push_back({lo, hi});
      e["intervals"] = iv;
    }
    raw.push_back(std::move(e));
  }
  j = nlohmann::json{{"scenario",
                      {{"n", r.scenario.n},
                       {"p", r.scenario.p},
                       {"spikes", r.scenario.spikes},
                       {"base", r.scenario.base},
                       {"rotated", r.scenario.rotated}}},
                     {"reps", r.reps},
                     {"seed", r.base_seed},
                     {"mcmc", r.mcmc},
                     {"methods", methods},
                     {"raw", raw}};
  if (r.wall_seconds) j["wall_seconds"] = *r.wall_seconds;
}

void from_json(const nlohmann::json& j, SimReport& r) {
  const auto& sc = j.at("scenario");
  r.scenario.n = sc.at("n").get<Eigen::Index>();
  r.scenario.p = sc.at("p").get<Eigen::Index>();
  r.scenario.spikes = sc.at("spikes").get<std::vector<double>>();
  r.scenario.base = sc.at("base").get<double>();
  r.scenario.rotated = sc.at("rotated").get<bool>();
  r.reps = j.at("reps").get<long>();
  r.base_seed = j.at("seed").get<std::uint64_t>();
  r.mcmc = j.at("mcmc").get<McmcSettings>();
  r.methods.clear();
  for (const auto& m : j.at("methods")) {
    MethodAggregate agg;
    agg.method = parse_method(m.at("method").get<std::string>());
    agg.failures = m.at("failures").get<long>();
    for (const auto& row : m.at("per_index")) {
      IndexAggregate ia;
      ia.index = row.at("index").get<Eigen::Index>();
      ia.truth = row.at("truth").get<double>();
      ia.mean_err_lambda = row.at("err_lambda").get<double>();
      ia.mean_err_xi = row.at("err_xi").get<double>();
      ia.cp = read_optional(row, "cp");
      ia.mean_il = read_optional(row, "il");
      ia.count = row.at("count").get<long>();
      agg.per_index.push_back(ia);
    }
    r.methods.push_back(std::move(agg));
  }
  r.raw.clear();
  for (const auto& e : j.at("raw")) {
    RepMetrics rm;
    rm.rep = e.at("rep").get<long>();
    rm.method = parse_method(e.at("method").get<std::string>());
    if (e.contains("error")) {
      rm.error = e.at("error").get<std::string>();
    } else {
      rm.estimate = e.at("estimate").get<std::vector<double>>();
      rm.err_lambda = e.at("err_lambda").get<std::vector<double>>();
      rm.err_xi = e.at("err_xi").get<std::vector<double>>();
      for (const auto& iv : e.at("intervals")) rm.intervals.emplace_back(iv.at(0).get<double>(), iv.at(1).get<double>());
    }
    r.raw.push_back(std::move(rm));
  }
  r.wall_seconds = read_optional(j, "wall_seconds");
}

std::string report_csv_header(const std::vector<Method>& methods) {
  std::string h = "n,index,truth";
  for (Method m : methods) {
    const std::string s = to_string(m);
    h += "," + s + "_err_lambda," + s + "_err_xi," + s + "_cp," + s + "_il";
  }
  return h;
}

void write_report_csv(const std::vector<SimReport>& reports, std::ostream& out) {
  if (reports.empty()) throw InputError("write_report_csv: no reports");
  std::vector<Method> methods;
  for (const auto& m : reports.front().methods) methods.push_back(m.method);
  for (const auto& r : reports) {
    if (r.methods.size() != methods.size()) throw InputError("write_report_csv: reports use different methods");
    for (std::size_t i = 0; i < methods.size(); ++i)
      if (r.methods[i].method != methods[i]) throw InputError("write_report_csv: reports use different methods");
  }
  out << report_csv_header(methods) << '\n';
  out << std::setprecision(17);
  auto cell = [&](const std::optional<double>& v) {
    out << ',';
    if (v) out << *v;
  };
  const std::size_t k = reports.front().scenario.spikes.size();
  for (std::size_t i = 0; i < k; ++i) {
    for (const auto& r : reports) {
      out << r.scenario.n << ',' << (i + 1) << ',' << r.scenario.spikes[i];
      for (const auto& m : r.methods) {
        const IndexAggregate& ia = m.per_index[i];
        if (ia.count > 0) {
          cell(ia.mean_err_lambda);
          cell(ia.mean_err_xi);
        } else {
          cell(std::nullopt);
          cell(std::nullopt);
        }
        cell(ia.cp);
        cell(ia.mean_il);
      }
      out << '\n';
    }
  }
}

}  // namespace spikedcov
