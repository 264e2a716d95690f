#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "spikedcov/errors.hpp"
#include "spikedcov/random.hpp"

namespace spikedcov {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kOrthoTolerance = 1e-8;

/// Dense symmetric matrix. Construction rejects non-finite or visibly
/// asymmetric input and stores the exactly symmetrized value.
class SymMatrix {
 public:
  explicit SymMatrix(MatrixXd m);

  Eigen::Index dim() const { return m_.rows(); }
  const MatrixXd& matrix() const { return m_; }

 private:
  MatrixXd m_;
};

/// ||G^T G - I||_F.
double orthogonality_defect(const Eigen::Ref<const MatrixXd>& g);

/// Square matrix with orthonormal columns (to kOrthoTolerance).
class OrthoMatrix {
 public:
  explicit OrthoMatrix(MatrixXd m);

  static OrthoMatrix identity(Eigen::Index p) { return OrthoMatrix(MatrixXd::Identity(p, p), Trusted{}); }

  // For factors that are orthogonal by construction (QR, eigensolvers) where
  // the O(p^3) check would dominate the cost of producing them.
  static OrthoMatrix from_trusted(MatrixXd m) { return OrthoMatrix(std::move(m), Trusted{}); }

  Eigen::Index dim() const { return m_.rows(); }
  const MatrixXd& matrix() const { return m_; }
  auto col(Eigen::Index j) const { return m_.col(j); }

 private:
  struct Trusted {};
  OrthoMatrix(MatrixXd m, Trusted) : m_(std::move(m)) {}
  MatrixXd m_;
};

struct Spectrum {
  VectorXd eigenvalues;  // descending
  OrthoMatrix eigenvectors;
};

/// Eigen-decomposition of [[a, b], [b, d]] = R(omega) diag(s1, s2) R(omega)^T
/// with R(omega) = [[cos, -sin], [sin, cos]].
struct TwoByTwoEig {
  double s1;
  double s2;
  double omega;  // (-pi/2, pi/2]
};

/// Full symmetric eigendecomposition, eigenvalues descending. Ties keep input
/// order; each eigenvector is signed so its largest-magnitude entry is positive.
Spectrum spectral_decompose(const SymMatrix& m);

/// Cyclic Jacobi eigensolver built from Givens rotations. Slower reference
/// implementation of spectral_decompose with the same output conventions.
Spectrum jacobi_spectral_decompose(const SymMatrix& m, double tol = 1e-14, int max_sweeps = 100);

TwoByTwoEig eig2x2_with_angle(double a, double b, double d);

/// In-place signed Givens rotation of rows i and j:
///   [row_i; row_j] <- diag(eps1, eps2) * R(theta) * [row_i; row_j].
template <class Derived>
void rotate_rows(Eigen::MatrixBase<Derived>& g, Eigen::Index i, Eigen::Index j,
                 double cos_t, double sin_t, int eps1, int eps2) {
  const Eigen::Index cols = g.cols();
  for (Eigen::Index c = 0; c < cols; ++c) {
    const double gi = g(i, c);
    const double gj = g(j, c);
    g(i, c) = eps1 * (cos_t * gi - sin_t * gj);
    g(j, c) = eps2 * (sin_t * gi + cos_t * gj);
  }
}

OrthoMatrix apply_signed_rotation(const OrthoMatrix& g, Eigen::Index i, Eigen::Index j,
                                  double theta, int eps1, int eps2);

/// Orthogonal factor of the QR decomposition with positive R diagonal.
/// Throws InvariantError when ||G^T G - I||_F >= 1e-3.
OrthoMatrix reorthonormalize(const Eigen::Ref<const MatrixXd>& g);

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix, sign-fixed).
OrthoMatrix haar_sample(Eigen::Index p, Rng& rng);

/// Flip each column so its largest-magnitude entry is positive.
void canonicalize_signs(MatrixXd& vectors);

}  // namespace spikedcov
