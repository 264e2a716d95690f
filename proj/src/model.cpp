#include "spikedcov/model.hpp"

#include <charconv>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

namespace spikedcov {

DataMatrix::DataMatrix(MatrixXd values) : values_(std::move(values)) {
  if (values_.rows() < 2) throw InputError("DataMatrix: need at least 2 observations (n >= 2)");
  if (values_.cols() < 2) throw InputError("DataMatrix: need dimension p >= 2");
  if (!values_.allFinite()) throw InputError("DataMatrix: non-finite entries");
}

VectorXd SampleSpectrum::w() const {
  VectorXd out = VectorXd::Zero(p);
  const Eigen::Index r = rank_bound();
  out.head(r) = static_cast<double>(n) * eigenvalues.head(r);
  return out;
}

SampleSpectrum SampleSpectrum::from_parts(Eigen::Index n, Eigen::Index p, VectorXd eigenvalues,
                                          OrthoMatrix q) {
  if (n < 1 || p < 1) throw InputError("SampleSpectrum: n and p must be positive");
  if (eigenvalues.size() != std::min(n, p))
    throw InputError("SampleSpectrum: expected n^p eigenvalues");
  if (q.dim() != p) throw InputError("SampleSpectrum: Q must be p x p");
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    if (!(eigenvalues(i) >= 0.0)) throw InputError("SampleSpectrum: eigenvalues must be >= 0");
    if (i > 0 && eigenvalues(i) > eigenvalues(i - 1))
      throw InputError("SampleSpectrum: eigenvalues must be descending");
  }
  SampleSpectrum ss;
  ss.n = n;
  ss.p = p;
  ss.trace_s = eigenvalues.sum();
  ss.eigenvalues = std::move(eigenvalues);
  ss.q = std::move(q);
  return ss;
}

VectorXd SpikedScenario::true_eigenvalues() const {
  VectorXd out = VectorXd::Constant(p, base);
  out.head(spikes.size()) = spikes;
  return out;
}

VectorXd SpikedScenario::true_eigenvector(Eigen::Index j) const {
  if (rotation) return rotation->col(j);
  return VectorXd::Unit(p, j);
}

void SpikedScenario::validate() const {
  if (n < 2 || p < 2) throw ConfigError("SpikedScenario: need n >= 2 and p >= 2");
  if (!(base > 0.0)) throw ConfigError("SpikedScenario: base level must be positive");
  if (spikes.size() >= std::min(n, p)) throw ConfigError("SpikedScenario: need k < n^p");
  for (Eigen::Index i = 0; i < spikes.size(); ++i) {
    if (!(spikes(i) > base)) throw ConfigError("SpikedScenario: spikes must exceed the base level");
    if (i > 0 && !(spikes(i) < spikes(i - 1)))
      throw ConfigError("SpikedScenario: spikes must be strictly descending");
  }
  if (rotation && rotation->dim() != p) throw ConfigError("SpikedScenario: rotation must be p x p");
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_number(std::string_view cell) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  if (cell.empty()) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) return std::nullopt;
  return value;
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    cells.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace

DataMatrix parse_matrix_csv(std::string_view text, const CsvOptions& options) {
  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start <= text.size();) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (!lines.empty() && lines.front().starts_with("\xEF\xBB\xBF")) lines.front().remove_prefix(3);
  if (lines.empty()) throw ParseError("csv: no data rows", 0, 0);

  std::size_t first = 0;
  {
    const auto cells = split_cells(lines.front());
    for (auto c : cells)
      if (!parse_number(c)) {
        first = 1;  // header row
        break;
      }
  }

  const std::size_t width = split_cells(lines.at(std::min(first, lines.size() - 1))).size();
  std::vector<double> flat;
  std::size_t rows = 0;
  for (std::size_t li = first; li < lines.size(); ++li) {
    const auto cells = split_cells(lines[li]);
    if (cells.size() != width) {
      std::ostringstream msg;
      msg << "csv: row " << li + 1 << " has " << cells.size() << " columns, expected " << width;
      throw ParseError(msg.str(), li + 1, cells.size());
    }
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
      const auto value = parse_number(cells[ci]);
      if (!value) {
        std::ostringstream msg;
        msg << "csv: non-numeric cell '" << trim(cells[ci]) << "' at row " << li + 1
            << ", column " << ci + 1;
        throw ParseError(msg.str(), li + 1, ci + 1);
      }
      flat.push_back(*value);
    }
    ++rows;
  }
  if (rows < 2) throw ParseError("csv: need at least 2 data rows (n >= 2)", lines.size(), 0);

  MatrixXd m = Eigen::Map<const RowMatrixXd>(flat.data(), static_cast<Eigen::Index>(rows),
                                             static_cast<Eigen::Index>(width));
  if (options.center) m.rowwise() -= m.colwise().mean();
  return DataMatrix(std::move(m));
}

DataMatrix load_matrix_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_matrix_csv(buf.str(), options);
}

namespace {

void clamp_nonnegative(VectorXd& v) {
  for (auto& x : v)
    if (x < 0.0) x = 0.0;
}

// Eigenpairs of the Gram matrix X X^T / n lifted to R^p: v = X^T u / ||X^T u||.
// Returns the number of columns that could be lifted (positive eigenvalues).
Eigen::Index lift_gram(const MatrixXd& x, Eigen::Index m, VectorXd& values, MatrixXd& vectors) {
  const double n = static_cast<double>(x.rows());
  const Spectrum gram = spectral_decompose(SymMatrix(x * x.transpose() / n));
  values = gram.eigenvalues.head(m);
  clamp_nonnegative(values);
  vectors.resize(x.cols(), m);
  const double zero_level = 1e-12 * values(0);
  Eigen::Index lifted = 0;
  for (; lifted < m; ++lifted) {
    // ||X^T u||^2 = n * mu; numerically-zero directions are left for completion.
    if (values(lifted) <= zero_level) break;
    VectorXd v = x.transpose() * gram.eigenvectors.col(lifted);
    vectors.col(lifted) = v / v.norm();
  }
  for (Eigen::Index j = lifted; j < m; ++j) values(j) = 0.0;
  return lifted;
}

}  // namespace

SampleSpectrum sample_covariance(const DataMatrix& x) {
  const Eigen::Index n = x.n();
  const Eigen::Index p = x.p();
  const MatrixXd& xv = x.values();
  SampleSpectrum ss;
  ss.n = n;
  ss.p = p;
  ss.trace_s = xv.squaredNorm() / static_cast<double>(n);
  if (p <= n) {
    Spectrum full = spectral_decompose(SymMatrix(xv.transpose() * xv / static_cast<double>(n)));
    clamp_nonnegative(full.eigenvalues);
    ss.eigenvalues = std::move(full.eigenvalues);
    ss.q = std::move(full.eigenvectors);
    return ss;
  }
  VectorXd values;
  MatrixXd lifted_vectors;
  const Eigen::Index lifted = lift_gram(xv, n, values, lifted_vectors);
  // Complete the basis: Householder QR of the lifted block yields an
  // orthonormal complement in its trailing columns.
  MatrixXd q(p, p);
  if (lifted > 0) {
    Eigen::HouseholderQR<MatrixXd> qr(lifted_vectors.leftCols(lifted));
    q = qr.householderQ();
    q.leftCols(lifted) = lifted_vectors.leftCols(lifted);
  } else {
    q.setIdentity();
  }
  canonicalize_signs(q);
  ss.eigenvalues = std::move(values);
  ss.q = OrthoMatrix::from_trusted(std::move(q));
  return ss;
}

LeadingEigen leading_sample_eigen(const DataMatrix& x, Eigen::Index m) {
  const Eigen::Index r = std::min(x.n(), x.p());
  if (m < 1 || m > r) throw DomainError("leading_sample_eigen: need 1 <= m <= n^p");
  LeadingEigen out;
  if (x.p() <= x.n()) {
    const Spectrum full =
        spectral_decompose(SymMatrix(x.values().transpose() * x.values() / static_cast<double>(x.n())));
    out.values = full.eigenvalues.head(m);
    clamp_nonnegative(out.values);
    out.vectors = full.eigenvectors.matrix().leftCols(m);
    return out;
  }
  const Eigen::Index lifted = lift_gram(x.values(), m, out.values, out.vectors);
  if (lifted < m) throw DomainError("leading_sample_eigen: requested eigenvectors of zero eigenvalues");
  canonicalize_signs(out.vectors);
  return out;
}

DataMatrix gen_spiked_data(const SpikedScenario& sc, Rng& rng) {
  sc.validate();
  const VectorXd sd = sc.true_eigenvalues().cwiseSqrt();
  MatrixXd z(sc.n, sc.p);
  for (Eigen::Index i = 0; i < sc.n; ++i)
    for (Eigen::Index j = 0; j < sc.p; ++j) z(i, j) = std_normal(rng) * sd(j);
  if (sc.rotation) z = z * sc.rotation->matrix().transpose();
  return DataMatrix(std::move(z));
}

double gauss_loglik(const Eigen::Ref<const VectorXd>& x, const Eigen::Ref<const VectorXd>& lambda,
                    const OrthoMatrix& u) {
  const Eigen::Index p = x.size();
  if (lambda.size() != p || u.dim() != p) throw InputError("gauss_loglik: dimension mismatch");
  if (!(lambda.minCoeff() > 0.0)) throw DomainError("gauss_loglik: eigenvalues must be positive");
  const VectorXd y = u.matrix().transpose() * x;
  const double quad = (y.array().square() / lambda.array()).sum();
  return -0.5 * (static_cast<double>(p) * std::log(2.0 * std::numbers::pi) +
                 lambda.array().log().sum() + quad);
}

}  // namespace spikedcov
