#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "spikedcov/model.hpp"
#include "spikedcov/prior.hpp"

namespace spikedcov {

struct PairSchedule {
  enum class Kind { kFullLexicographic, kRandomScan };
  Kind kind = Kind::kFullLexicographic;
  Eigen::Index pairs_per_sweep = 0;  // random scan only

  static PairSchedule full() { return {}; }
  static PairSchedule random_scan(Eigen::Index m) { return {Kind::kRandomScan, m}; }
};

struct McmcSettings {
  long burn_in = 500;
  long draws = 2000;
  long thin = 1;
  long reorth_every = 100;
  std::uint64_t seed = 0;
  PairSchedule schedule;

  void validate() const;
  long retained() const { return draws / thin; }
};

/// Gibbs state in rotated coordinates Gamma = Q^T U. Gamma is stored
/// row-major because the eigenvector update rotates pairs of rows.
struct ChainState {
  RowMatrixXd gamma;
  VectorXd lambda;  // unordered eigenvalues, aligned with the columns of gamma
  VectorXd c;       // c_i = (Gamma^T (hI + W) Gamma)_{ii}
};

/// Retained draws. Eigenvalues are sorted descending per draw and the stored
/// eigenvectors (columns of U = Q Gamma) follow the same order.
struct PosteriorDraws {
  MatrixXd sorted_lambda;            // draws x p
  std::vector<MatrixXd> top_vectors; // one p x k matrix per draw
  MatrixXd loglik;                   // draws x n, empty unless data were supplied
  McmcSettings settings;
  Eigen::Index k = 0;
  double lambda_acceptance = 1.0;    // Metropolis acceptance rate (b = 0), 1 for b = 1
  double max_orthogonality_defect = 0.0;  // largest drift seen before re-orthonormalizing

  Eigen::Index size() const { return sorted_lambda.rows(); }
};

/// Diagonal of hI + W.
VectorXd posterior_scale_diag(const SampleSpectrum& ss, double h);

/// c_i = h + sum_j Gamma_ji^2 w_j.
VectorXd compute_c(const Eigen::Ref<const MatrixXd>& gamma, const SampleSpectrum& ss, double h);
VectorXd compute_c(const RowMatrixXd& gamma, const VectorXd& scale_diag);

/// Gamma = I and lambda at its conditional posterior mean c_i / (n + 2 a_i - 4).
ChainState initial_state(const SampleSpectrum& ss, const PriorConfig& cfg);

/// Eigenvalue conditional. b = 1: exact inverse-gamma(a_i + n/2 - 1, c_i/2)
/// draws. b = 0: independence Metropolis with that proposal, correcting for
/// the prod |lambda_i - lambda_j| factor. Returns the number of accepted moves.
long sample_lambda_step(ChainState& state, const PriorConfig& cfg, Eigen::Index n, Rng& rng);

/// Log Metropolis ratio for replacing state.lambda(i) by `proposal` when b = 0.
double repulsion_log_ratio(const VectorXd& lambda, Eigen::Index i, double proposal);

/// alpha in (0,1) with density proportional to exp(c alpha) alpha^{-1/2} (1-alpha)^{-1/2}, c <= 0.
double sample_tilted_beta(double c, Rng& rng);
/// Reference sampler: arcsine proposal accepted with probability exp(c alpha).
double sample_tilted_beta_reference(double c, Rng& rng);

/// Diagnostics of one pair update (useful to tests).
struct PairUpdate {
  double s1, s2, omega;
  double tilt;   // c <= 0
  double alpha;  // cos^2(theta + omega) after orientation
  double theta;
  int eps1, eps2;
};

/// Signed Givens update of rows i < j of Gamma from their full conditional.
PairUpdate sample_pair_rotation(ChainState& state, Eigen::Index i, Eigen::Index j,
                                const VectorXd& scale_diag, Rng& rng);

/// One lambda step followed by one pass of pair rotations.
void gibbs_sweep(ChainState& state, const PairSchedule& schedule, const PriorConfig& cfg,
                 const SampleSpectrum& ss, const VectorXd& scale_diag, Rng& rng);

/// Full chain. When `x` is given, per-observation log-likelihoods are recorded.
PosteriorDraws run_chain(const SampleSpectrum& ss, const PriorConfig& cfg, const McmcSettings& ms,
                         const DataMatrix* x = nullptr);

/// Unit-norm eigenvector columns of U = Q Gamma for the given column indices.
MatrixXd recover_eigenvectors(const SampleSpectrum& ss, const RowMatrixXd& gamma,
                              const std::vector<Eigen::Index>& columns);

/// Indices sorting lambda descending, ties by original index.
std::vector<Eigen::Index> descending_order(const VectorXd& lambda);

void to_json(nlohmann::json& j, const McmcSettings& ms);
void from_json(const nlohmann::json& j, McmcSettings& ms);
/// Summary: settings, shape, per-index posterior means of the sorted eigenvalues.
nlohmann::json draws_summary(const PosteriorDraws& d);
/// One row per draw: sorted eigenvalues, then the top-k eigenvectors flattened column by column.
void write_draws_csv(const PosteriorDraws& d, std::ostream& out);

}  // namespace spikedcov
