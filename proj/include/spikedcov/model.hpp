#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "spikedcov/linalg.hpp"

namespace spikedcov {

/// n x p observation matrix, rows are observations.
class DataMatrix {
 public:
  explicit DataMatrix(MatrixXd values);

  Eigen::Index n() const { return values_.rows(); }
  Eigen::Index p() const { return values_.cols(); }
  const MatrixXd& values() const { return values_; }

 private:
  MatrixXd values_;
};

/// Spectrum of S = X^T X / n. `eigenvalues` holds the n^p leading values;
/// columns of Q beyond n^p complete an orthonormal basis of R^p.
struct SampleSpectrum {
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  VectorXd eigenvalues;
  OrthoMatrix q = OrthoMatrix::identity(1);
  double trace_s = 0.0;

  Eigen::Index rank_bound() const { return std::min(n, p); }

  /// Diagonal of W in nS = Q W Q^T: n * lambda_j for j < n^p, zero beyond.
  VectorXd w() const;

  /// Build a spectrum directly (synthetic tests, oracles). Validates shapes,
  /// nonnegativity and ordering; trace is the eigenvalue sum.
  static SampleSpectrum from_parts(Eigen::Index n, Eigen::Index p, VectorXd eigenvalues,
                                   OrthoMatrix q);
};

struct SpikedScenario {
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  VectorXd spikes;  // strictly descending, all > base
  double base = 1.0;
  // Optional fixed rotation R: Sigma0 = R diag(...) R^T and the true
  // eigenvectors are the leading columns of R instead of standard basis vectors.
  std::optional<OrthoMatrix> rotation;

  Eigen::Index k() const { return spikes.size(); }
  VectorXd true_eigenvalues() const;  // length p, descending
  VectorXd true_eigenvector(Eigen::Index j) const;
  void validate() const;
};

struct CsvOptions {
  bool center = false;
};

DataMatrix parse_matrix_csv(std::string_view text, const CsvOptions& options = {});
DataMatrix load_matrix_csv(const std::filesystem::path& path, const CsvOptions& options = {});

SampleSpectrum sample_covariance(const DataMatrix& x);

/// Leading m eigenpairs of S without completing the basis (cheap for p >> n).
struct LeadingEigen {
  VectorXd values;
  MatrixXd vectors;  // p x m
};
LeadingEigen leading_sample_eigen(const DataMatrix& x, Eigen::Index m);

DataMatrix gen_spiked_data(const SpikedScenario& sc, Rng& rng);

/// log N(x | 0, U diag(lambda) U^T).
double gauss_loglik(const Eigen::Ref<const VectorXd>& x, const Eigen::Ref<const VectorXd>& lambda,
                    const OrthoMatrix& u);

}  // namespace spikedcov
