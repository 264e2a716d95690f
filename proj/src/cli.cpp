#include "spikedcov/cli.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spikedcov/bench.hpp"
#include "spikedcov/estimators.hpp"
#include "spikedcov/oracle.hpp"
#include "spikedcov/selection.hpp"

namespace spikedcov::cli {

namespace {

using Clock = std::chrono::steady_clock;

struct Common {
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "json";
  unsigned threads = 1;
  bool timing = false;
};

struct DataFlags {
  std::string input;
  bool center = false;
};

struct ChainFlags {
  long draws = 2000;
  long burnin = 500;
  long thin = 1;
  long reorth_every = 100;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Random seed")->envname("SPIKEDCOV_SEED")->capture_default_str();
  app->add_option("--out", c.out, "Output file (default: standard output)");
  app->add_option("--format", c.format, "Output format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  app->add_option("--threads", c.threads, "Worker threads")->check(CLI::Range(1u, 1024u))->capture_default_str();
  app->add_flag("--timing", c.timing, "Include wall-clock time in the output");
}

void add_data(CLI::App* app, DataFlags& d) {
  app->add_option("--input", d.input, "Data matrix CSV (rows = observations)")->required()->check(CLI::ExistingFile);
  app->add_flag("--center", d.center, "Subtract column means before analysis");
}

void add_chain(CLI::App* app, ChainFlags& f) {
  app->add_option("--draws", f.draws, "Post-burn-in sweeps")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--burnin", f.burnin, "Burn-in sweeps")->check(CLI::NonNegativeNumber)->capture_default_str();
  app->add_option("--thin", f.thin, "Keep every thin-th draw")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--reorth-every", f.reorth_every, "Sweeps between re-orthonormalizations")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

McmcSettings settings_from(const ChainFlags& f, std::uint64_t seed) {
  McmcSettings ms;
  ms.draws = f.draws;
  ms.burn_in = f.burnin;
  ms.thin = f.thin;
  ms.reorth_every = f.reorth_every;
  ms.seed = seed;
  ms.validate();
  return ms;
}

DataMatrix load_data(const DataFlags& d) { return load_matrix_csv(d.input, CsvOptions{d.center}); }

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Writes to --out when given, otherwise to the caller's stream.
void emit(const Common& c, std::ostream& fallback, const std::string& text) {
  if (c.out.empty()) {
    fallback << text;
    return;
  }
  std::ofstream f(c.out, std::ios::binary);
  if (!f) throw IoError("cannot open output file '" + c.out + "'");
  f << text;
  if (!f) throw IoError("failed writing output file '" + c.out + "'");
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

std::string matrix_csv(const MatrixXd& m) {
  std::ostringstream s;
  s << std::setprecision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) s << (j ? "," : "") << m(i, j);
    s << '\n';
  }
  return s.str();
}

nlohmann::json columns_json(const MatrixXd& m) {
  nlohmann::json cols = nlohmann::json::array();
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const VectorXd c = m.col(j);
    cols.push_back(std::vector<double>(c.begin(), c.end()));
  }
  return cols;
}

// ---- estimate ----

struct EstimateFlags {
  DataFlags data;
  ChainFlags chain;
  std::string prior = "gsiw";
  Eigen::Index k = 0;
  std::optional<double> h;
  std::string draws_out;
};

void run_estimate(const Common& c, const EstimateFlags& f, std::ostream& out) {
  const auto start = Clock::now();
  const DataMatrix x = load_data(f.data);
  const SampleSpectrum ss = sample_covariance(x);
  if (f.k < 1 || f.k >= ss.rank_bound())
    throw ConfigError("--k must satisfy 1 <= k < min(n, p) = " + std::to_string(ss.rank_bound()));
  PriorConfig cfg;
  if (f.prior == "gsiw") cfg = gsiw_data_driven(ss, f.k);
  else if (f.prior == "giw") cfg = giw_data_driven(ss, f.k);
  else if (f.prior == "siw") cfg = siw_fixed(ss.p, f.k);
  else cfg = iw_fixed(ss.p, f.k);
  if (f.h) cfg.h = *f.h;
  cfg.validate(ss.rank_bound());

  const PosteriorDraws d = run_chain(ss, cfg, settings_from(f.chain, c.seed));
  const auto summary = summarize_eigenvalues(d, f.k);
  const MatrixXd vectors = estimate_eigenvectors(d, ss.q.matrix().leftCols(f.k));

  if (!f.draws_out.empty()) {
    std::ofstream dr(f.draws_out, std::ios::binary);
    if (!dr) throw IoError("cannot open draws file '" + f.draws_out + "'");
    write_draws_csv(d, dr);
  }

  if (c.format == "csv") {
    std::ostringstream s;
    s << "index,point,lo,hi,il\n" << std::setprecision(17);
    for (const auto& e : summary)
      s << e.index << ',' << e.point << ',' << e.lo << ',' << e.hi << ',' << e.interval_length() << '\n';
    emit(c, out, s.str());
    return;
  }
  nlohmann::json j{{"n", ss.n},
                   {"p", ss.p},
                   {"k", f.k},
                   {"prior_name", f.prior},
                   {"prior", cfg},
                   {"mcmc", d.settings},
                   {"eigenvalues", summary},
                   {"eigenvectors", columns_json(vectors)},
                   {"lambda_acceptance", d.lambda_acceptance},
                   {"max_orthogonality_defect", d.max_orthogonality_defect}};
  if (c.timing) j["runtime_seconds"] = seconds_since(start);
  emit(c, out, dump(j));
}

// ---- simulate ----

struct SimulateFlags {
  int scenario = 2;
  std::vector<long> n;
  long p = 0;
  long reps = 20;
  std::vector<std::string> methods;
  ChainFlags chain;
};

void run_simulate(const Common& c, const SimulateFlags& f, std::ostream& out) {
  SpikedScenario sc;
  std::vector<long> ns = f.n;
  if (f.scenario == 1) {
    sc.p = 500;
    sc.spikes = VectorXd(3);
    sc.spikes << 50.0, 20.0, 10.0;
    if (ns.empty()) ns = {50};
  } else {
    sc.p = 100;
    sc.spikes = VectorXd(3);
    sc.spikes << 5.0, 4.0, 3.0;
    if (ns.empty()) ns = {20, 40, 60, 80};
  }
  if (f.p > 0) sc.p = f.p;

  BenchOptions opt;
  if (!f.methods.empty()) {
    opt.methods.clear();
    for (const auto& m : f.methods) opt.methods.push_back(parse_method(m));
  }
  opt.reps = f.reps;
  opt.mcmc = settings_from(f.chain, c.seed);
  opt.base_seed = c.seed;
  opt.threads = c.threads;
  opt.timing = c.timing;

  std::vector<SimReport> reports;
  for (long n : ns) {
    sc.n = n;
    reports.push_back(run_case(sc, opt));
  }
  if (c.format == "csv") {
    std::ostringstream s;
    write_report_csv(reports, s);
    emit(c, out, s.str());
    return;
  }
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : reports) j.push_back(r);
  emit(c, out, dump(reports.size() == 1 ? j.at(0) : j));
}

// ---- select-k and reduce ----

struct SelectFlags {
  DataFlags data;
  ChainFlags chain;
  std::string criterion = "waic";
  Eigen::Index kmax = 0;
};

SelectionOptions selection_options(const Common& c, const SelectFlags& f) {
  SelectionOptions opt;
  opt.criterion = parse_criterion(f.criterion);
  opt.k_max = f.kmax;
  opt.mcmc = settings_from(f.chain, c.seed);
  opt.threads = c.threads;
  return opt;
}

std::string selection_csv(const SelectionResult& r) {
  std::ostringstream s;
  s << "k,score,chosen\n" << std::setprecision(17);
  for (std::size_t i = 0; i < r.scores.size(); ++i)
    s << i + 1 << ',' << r.scores[i] << ',' << (static_cast<Eigen::Index>(i) + 1 == r.chosen_k ? 1 : 0) << '\n';
  return s.str();
}

void run_select(const Common& c, const SelectFlags& f, std::ostream& out) {
  const auto start = Clock::now();
  const DataMatrix x = load_data(f.data);
  const SelectionResult r = select_k(x, selection_options(c, f));
  if (c.format == "csv") {
    emit(c, out, selection_csv(r));
    return;
  }
  nlohmann::json j = r;
  if (c.timing) j["runtime_seconds"] = seconds_since(start);
  emit(c, out, dump(j));
}

void run_reduce(const Common& c, const SelectFlags& f, std::ostream& out) {
  const auto start = Clock::now();
  const DataMatrix x = load_data(f.data);
  const SampleSpectrum ss = sample_covariance(x);
  const SelectionResult sel = select_k(x, ss, selection_options(c, f));
  const Reduction red = reduce_reconstruct(x, ss.q.matrix().leftCols(sel.chosen_k), ss);
  if (c.format == "csv") {
    emit(c, out, matrix_csv(red.reconstructed));
    return;
  }
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < red.reconstructed.rows(); ++i) {
    const VectorXd row = red.reconstructed.row(i);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  nlohmann::json j{{"selection", sel},
                   {"k", sel.chosen_k},
                   {"nmse", red.nmse},
                   {"cve", red.cve},
                   {"reconstructed", rows}};
  if (c.timing) j["runtime_seconds"] = seconds_since(start);
  emit(c, out, dump(j));
}

// ---- validate ----

struct ValidateFlags {
  long lemma_reps = 200;
  long is_samples = 200000;
  long chain_draws = 50000;
  long beta_draws = 20000;
};

struct CheckRow {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string note;
};

void to_json(nlohmann::json& j, const CheckRow& r) {
  j = nlohmann::json{{"check", r.name}, {"value", r.value}, {"tolerance", r.tolerance}, {"pass", r.pass}};
  if (!r.note.empty()) j["note"] = r.note;
}

std::vector<CheckRow> run_checks(const Common& c, const ValidateFlags& f) {
  std::vector<CheckRow> rows;
  Rng rng(c.seed);
  for (double tilt : {0.0, -1.0, -10.0, -100.0, -1000.0}) {
    std::ostringstream label;
    label << "c=" << tilt;
    const TiltedBetaReference ref = tilted_beta_reference(tilt);
    const double gap = std::abs(ref.mean - ref.bessel_mean);
    rows.push_back({"quadrature_vs_bessel_mean " + label.str(), gap, 1e-8, gap < 1e-8, ""});

    std::vector<double> draws(static_cast<std::size_t>(f.beta_draws));
    double sum = 0.0, sq = 0.0;
    for (auto& v : draws) {
      v = sample_tilted_beta(tilt, rng);
      sum += v;
      sq += v * v;
    }
    const double m = static_cast<double>(draws.size());
    const double mean = sum / m;
    const double se = std::sqrt((sq / m - mean * mean) / (m - 1.0));
    const double z = std::abs(mean - ref.bessel_mean) / se;
    rows.push_back({"tilted_beta_mean_z " + label.str(), z, 4.0, z < 4.0, ""});
    const GoodnessOfFit g = tilted_beta_gof(draws, tilt);
    rows.push_back({"tilted_beta_gof_pvalue " + label.str(), g.p_value, 0.001, g.p_value > 0.001, "pass if above"});
  }

  {
    SpikedScenario sc{12, 4, VectorXd::Constant(1, 8.0), 1.0, std::nullopt};
    Rng data_rng(derive_seed(c.seed, 1));
    const SampleSpectrum ss = sample_covariance(gen_spiked_data(sc, data_rng));
    const PriorConfig cfg = gsiw_data_driven(ss, 1);
    Rng is_rng(derive_seed(c.seed, 2));
    const PosteriorOracleResult orc = is_posterior_oracle(ss, cfg, f.is_samples, is_rng);
    McmcSettings ms;
    ms.draws = f.chain_draws;
    ms.seed = derive_seed(c.seed, 3);
    const PosteriorDraws d = run_chain(ss, cfg, ms);
    // Batch means over 40 batches for the chain's standard error.
    auto batch = [&](auto value) {
      const Eigen::Index b = 40, len = d.size() / b;
      std::vector<double> means(static_cast<std::size_t>(b), 0.0);
      for (Eigen::Index i = 0; i < b * len; ++i) means[static_cast<std::size_t>(i / len)] += value(i) / len;
      double mu = 0.0, var = 0.0;
      for (double v : means) mu += v / b;
      for (double v : means) var += (v - mu) * (v - mu) / (b - 1);
      return std::pair{mu, std::sqrt(var / b)};
    };
    const auto [l1, l1_se] = batch([&](Eigen::Index i) { return d.sorted_lambda(i, 0); });
    const auto [e1, e1_se] = batch([&](Eigen::Index i) {
      const double v = d.top_vectors[static_cast<std::size_t>(i)](0, 0);
      return 1.0 - v * v;
    });
    const double z1 = std::abs(l1 - orc.sorted_lambda[0].mean) / std::hypot(l1_se, orc.sorted_lambda[0].se);
    const double z2 = std::abs(e1 - orc.vector_error[0].mean) / std::hypot(e1_se, orc.vector_error[0].se);
    rows.push_back({"gibbs_vs_is_oracle_top_eigenvalue_z", z1, 3.0, z1 < 3.0, ""});
    rows.push_back({"gibbs_vs_is_oracle_vector_error_z", z2, 3.0, z2 < 3.0, ""});
  }

  {
    ValidationTarget vt{100, 1000, VectorXd::Constant(1, 50.0), 1.0};
    const LemmaCheck lc = lemma_asymptotics_check(vt, f.lemma_reps, derive_seed(c.seed, 4), c.threads);
    const LemmaRow& row = lc.rows.at(0);
    rows.push_back({"sample_eigenvalue_ratio_deviation", std::abs(row.ratio_deviation()), 0.05,
                    std::abs(row.ratio_deviation()) <= 0.05, ""});
    rows.push_back({"sample_eigenvector_alignment_deviation", std::abs(row.alignment_deviation()), 0.02,
                    std::abs(row.alignment_deviation()) <= 0.02, ""});
  }
  return rows;
}

bool run_validate(const Common& c, const ValidateFlags& f, std::ostream& out) {
  const std::vector<CheckRow> rows = run_checks(c, f);
  bool all = true;
  for (const auto& r : rows) all = all && r.pass;
  if (c.format == "json") {
    emit(c, out, dump(nlohmann::json{{"checks", rows}, {"all_pass", all}}));
  } else {
    std::ostringstream s;
    s << "check,value,tolerance,result\n" << std::setprecision(10);
    for (const auto& r : rows) s << r.name << ',' << r.value << ',' << r.tolerance << ',' << (r.pass ? "PASS" : "FAIL") << '\n';
    emit(c, out, s.str());
  }
  return all;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian estimation of spiked covariance eigenstructure"};
  app.require_subcommand(1);
  // --h is the prior scale, so help is long-form only.
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  Common common;
  EstimateFlags est;
  auto* estimate = app.add_subcommand("estimate", "Posterior eigenvalue and eigenvector estimates");
  estimate->set_help_flag("--help", "Print this help message and exit");
  add_common(estimate, common);
  add_data(estimate, est.data);
  add_chain(estimate, est.chain);
  estimate->add_option("--prior", est.prior, "Prior family")
      ->check(CLI::IsMember({"gsiw", "giw", "siw", "iw"}))
      ->capture_default_str();
  estimate->add_option("--k", est.k, "Number of spiked eigenvalues")->required()->check(CLI::PositiveNumber);
  estimate->add_option("--h", est.h, "Override the prior scale h")->check(CLI::PositiveNumber);
  estimate->add_option("--draws-out", est.draws_out, "Also write raw draws to this CSV file");

  SimulateFlags sim;
  auto* simulate = app.add_subcommand("simulate", "Simulation study on a spiked scenario");
  add_common(simulate, common);
  add_chain(simulate, sim.chain);
  simulate->add_option("--case", sim.scenario, "Scenario preset: 1 = diag(50,20,10,1..) p=500, 2 = diag(5,4,3,1..) p=100")
      ->check(CLI::IsMember({1, 2}))
      ->capture_default_str();
  simulate->add_option("--n", sim.n, "Sample sizes (default: the preset's)")->check(CLI::Range(2L, 1000000L));
  simulate->add_option("--p", sim.p, "Dimension (default: the preset's)")->check(CLI::Range(2L, 1000000L));
  simulate->add_option("--reps", sim.reps, "Replications")->check(CLI::PositiveNumber)->capture_default_str();
  simulate->add_option("--methods", sim.methods, "Subset of sample,gsiw,giw,siw,iw,spoet (default: all)")
      ->check(CLI::IsMember({"sample", "gsiw", "giw", "siw", "iw", "spoet"}))
      ->delimiter(',');

  SelectFlags sel;
  auto* selectk = app.add_subcommand("select-k", "Choose the number of spikes");
  add_common(selectk, common);
  add_data(selectk, sel.data);
  add_chain(selectk, sel.chain);
  selectk->add_option("--criterion", sel.criterion, "Selection criterion")
      ->check(CLI::IsMember({"waic", "gr", "icp3"}))
      ->capture_default_str();
  selectk->add_option("--kmax", sel.kmax, "Largest candidate k (0: floor(min(n,p)/2))")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  SelectFlags red;
  auto* reduce = app.add_subcommand("reduce", "Select k, then project onto the top-k sample eigenvectors");
  add_common(reduce, common);
  add_data(reduce, red.data);
  add_chain(reduce, red.chain);
  reduce->add_option("--criterion", red.criterion, "Selection criterion")
      ->check(CLI::IsMember({"waic", "gr", "icp3"}))
      ->capture_default_str();
  reduce->add_option("--kmax", red.kmax, "Largest candidate k (0: floor(min(n,p)/2))")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  ValidateFlags val;
  auto* validate = app.add_subcommand("validate", "Run the built-in oracle checks and print a pass/fail table");
  add_common(validate, common);
  validate->add_option("--lemma-reps", val.lemma_reps, "Replications for the sample-eigenstructure check")
      ->check(CLI::Range(2L, 100000L))
      ->capture_default_str();
  validate->add_option("--is-samples", val.is_samples, "Importance samples for the posterior oracle")
      ->check(CLI::Range(1000L, 100000000L))
      ->capture_default_str();
  validate->add_option("--chain-draws", val.chain_draws, "Gibbs draws compared with the oracle")
      ->check(CLI::Range(400L, 100000000L))
      ->capture_default_str();
  validate->add_option("--beta-draws", val.beta_draws, "Draws per tilted Beta check")
      ->check(CLI::Range(100L, 100000000L))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  // The oracle table reads best as text unless JSON was asked for explicitly.
  if (*validate && validate->count("--format") == 0) common.format = "csv";

  try {
    if (*estimate) run_estimate(common, est, out);
    else if (*simulate) run_simulate(common, sim, out);
    else if (*selectk) run_select(common, sel, out);
    else if (*reduce) run_reduce(common, red, out);
    else if (*validate) {
      if (!run_validate(common, val, out)) {
        err << "validate: one or more checks failed\n";
        return kExitRuntime;
      }
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace spikedcov::cli
