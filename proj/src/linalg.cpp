#include "spikedcov/linalg.hpp"

#include <algorithm>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

namespace spikedcov {

namespace {

void require_finite(const MatrixXd& m, const char* who) {
  if (!m.allFinite()) throw InputError(std::string(who) + ": matrix has non-finite entries");
}

// Stable descending order of eigenvalues, then canonical signs.
Spectrum sorted_spectrum(const VectorXd& values, const MatrixXd& vectors) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index l, Eigen::Index r) { return values(l) > values(r); });
  VectorXd sorted(values.size());
  MatrixXd vecs(vectors.rows(), vectors.cols());
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    sorted(k) = values(order[static_cast<std::size_t>(k)]);
    vecs.col(k) = vectors.col(order[static_cast<std::size_t>(k)]);
  }
  canonicalize_signs(vecs);
  return Spectrum{std::move(sorted), OrthoMatrix::from_trusted(std::move(vecs))};
}

}  // namespace

SymMatrix::SymMatrix(MatrixXd m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols() || m_.rows() == 0)
    throw InputError("SymMatrix: matrix must be square and non-empty");
  require_finite(m_, "SymMatrix");
  const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
  if ((m_ - m_.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw InputError("SymMatrix: matrix is not symmetric");
  m_ = 0.5 * (m_ + m_.transpose()).eval();
}

double orthogonality_defect(const Eigen::Ref<const MatrixXd>& g) {
  const auto p = g.cols();
  return (g.transpose() * g - MatrixXd::Identity(p, p)).norm();
}

OrthoMatrix::OrthoMatrix(MatrixXd m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols() || m_.rows() == 0)
    throw InvariantError("OrthoMatrix: matrix must be square and non-empty");
  if (!m_.allFinite()) throw InvariantError("OrthoMatrix: non-finite entries");
  const double defect = orthogonality_defect(m_);
  if (!(defect <= kOrthoTolerance))
    throw InvariantError("OrthoMatrix: ||G^T G - I||_F = " + std::to_string(defect) +
                         " exceeds tolerance");
}

void canonicalize_signs(MatrixXd& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
      // Strict comparison keeps the first entry among magnitude ties.
      if (std::abs(vectors(r, c)) > best + 1e-12) {
        best = std::abs(vectors(r, c));
        arg = r;
      }
    }
    if (vectors(arg, c) < 0.0) vectors.col(c) *= -1.0;
  }
}

Spectrum spectral_decompose(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(m.matrix());
  if (solver.info() != Eigen::Success) throw InputError("spectral_decompose: eigensolver failed");
  // Eigen returns ascending order; reverse before the stable sort so that
  // exact ties come out in the solver's (input-aligned) order.
  VectorXd values = solver.eigenvalues().reverse();
  MatrixXd vectors = solver.eigenvectors().rowwise().reverse();
  return sorted_spectrum(values, vectors);
}

Spectrum jacobi_spectral_decompose(const SymMatrix& m, double tol, int max_sweeps) {
  MatrixXd a = m.matrix();
  const Eigen::Index p = a.rows();
  MatrixXd v = MatrixXd::Identity(p, p);
  const double scale = std::max(a.norm(), 1e-300);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = i + 1; j < p; ++j) off += a(i, j) * a(i, j);
    if (std::sqrt(2.0 * off) <= tol * scale) break;
    for (Eigen::Index i = 0; i < p; ++i) {
      for (Eigen::Index j = i + 1; j < p; ++j) {
        if (a(i, j) == 0.0) continue;
        // Rotation in the (i, j) plane zeroing a(i, j): the 2x2 closed form
        // gives the angle that diagonalizes the block.
        const TwoByTwoEig e = eig2x2_with_angle(a(i, i), a(i, j), a(j, j));
        const double c = std::cos(e.omega);
        const double s = std::sin(e.omega);
        // a <- R^T a R and v <- v R with R = R(omega) embedded in plane (i, j).
        rotate_rows(a, i, j, c, -s, 1, 1);
        for (Eigen::Index r = 0; r < p; ++r) {
          const double ai = a(r, i), aj = a(r, j);
          a(r, i) = c * ai + s * aj;
          a(r, j) = -s * ai + c * aj;
          const double vi = v(r, i), vj = v(r, j);
          v(r, i) = c * vi + s * vj;
          v(r, j) = -s * vi + c * vj;
        }
        a(i, j) = a(j, i) = 0.0;
      }
    }
  }
  return sorted_spectrum(a.diagonal(), v);
}

TwoByTwoEig eig2x2_with_angle(double a, double b, double d) {
  const double mean = 0.5 * (a + d);
  const double radius = std::hypot(0.5 * (a - d), b);
  double omega = 0.5 * std::atan2(2.0 * b, a - d);
  if (omega <= -std::numbers::pi / 2) omega += std::numbers::pi;
  return TwoByTwoEig{mean + radius, mean - radius, omega};
}

OrthoMatrix apply_signed_rotation(const OrthoMatrix& g, Eigen::Index i, Eigen::Index j,
                                  double theta, int eps1, int eps2) {
  if (i == j) throw IndexError("apply_signed_rotation: row indices must differ");
  if (i < 0 || j < 0 || i >= g.dim() || j >= g.dim())
    throw IndexError("apply_signed_rotation: row index out of range");
  if ((eps1 != 1 && eps1 != -1) || (eps2 != 1 && eps2 != -1))
    throw DomainError("apply_signed_rotation: signs must be +1 or -1");
  MatrixXd out = g.matrix();
  rotate_rows(out, i, j, std::cos(theta), std::sin(theta), eps1, eps2);
  return OrthoMatrix::from_trusted(std::move(out));
}

namespace {

MatrixXd positive_diagonal_q(const MatrixXd& m) {
  Eigen::HouseholderQR<MatrixXd> qr(m);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(m.rows(), m.cols());
  const MatrixXd& r = qr.matrixQR();
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    if (r(c, c) < 0.0) q.col(c) *= -1.0;
  return q;
}

}  // namespace

OrthoMatrix reorthonormalize(const Eigen::Ref<const MatrixXd>& g) {
  if (g.rows() != g.cols() || g.rows() == 0)
    throw InvariantError("reorthonormalize: matrix must be square and non-empty");
  const double defect = orthogonality_defect(g);
  if (!(defect < 1e-3))
    throw InvariantError("reorthonormalize: input too far from orthogonal (defect " +
                         std::to_string(defect) + ")");
  return OrthoMatrix::from_trusted(positive_diagonal_q(g));
}

OrthoMatrix haar_sample(Eigen::Index p, Rng& rng) {
  if (p < 1) throw DomainError("haar_sample: dimension must be positive");
  MatrixXd z(p, p);
  for (Eigen::Index c = 0; c < p; ++c)
    for (Eigen::Index r = 0; r < p; ++r) z(r, c) = std_normal(rng);
  return OrthoMatrix::from_trusted(positive_diagonal_q(z));
}

}  // namespace spikedcov
