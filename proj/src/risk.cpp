#include "crossalpha/risk.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "crossalpha/csv.hpp"
#include "crossalpha/errors.hpp"

namespace crossalpha {

StructuredCov::StructuredCov(Matrix loadings, Matrix factor_cov, Vector idio_var,
                             double epsilon)
    : b_(std::move(loadings)),
      omega_(std::move(factor_cov)),
      idio_(std::move(idio_var)),
      eps_(epsilon) {
  if (eps_ < 0.0) throw ConfigError("risk model: epsilon must be >= 0");
  if (b_.rows() != idio_.size() || b_.cols() != omega_.rows() ||
      omega_.rows() != omega_.cols()) {
    throw DomainError("risk model: dimension mismatch");
  }
  for (int i = 0; i < idio_.size(); ++i) {
    if (idio_[i] < 0.0) throw DomainError("risk model: negative idio variance");
  }
}

Vector StructuredCov::apply(const Vector& w) const {
  if (w.size() != dim()) throw DomainError("cov operator: size mismatch");
  Vector out = idio_.cwiseProduct(w) + eps_ * w;
  if (b_.cols() > 0) out += b_ * (omega_ * (b_.transpose() * w));
  return out;
}

Matrix StructuredCov::dense() const {
  if (dim() > 1000) {
    throw DomainError("risk model: dense materialization limited to N <= 1000");
  }
  Matrix out = Matrix::Zero(dim(), dim());
  if (b_.cols() > 0) out = b_ * omega_ * b_.transpose();
  out += idio_.asDiagonal();
  out += eps_ * Matrix::Identity(dim(), dim());
  return out;
}

namespace {

/// Greedy deterministic column selection: keep a column when it is not
/// numerically in the span of the kept columns (lowest index wins).
std::vector<int> independent_columns(const Matrix& x, double tol = 1e-10) {
  std::vector<int> kept;
  Matrix q(x.rows(), x.cols());  // orthonormalized kept columns
  int m = 0;
  for (int j = 0; j < x.cols(); ++j) {
    Vector v = x.col(j);
    const double norm0 = v.norm();
    if (norm0 <= 0.0) continue;
    for (int r = 0; r < m; ++r) v -= q.col(r).dot(v) * q.col(r);
    // second orthogonalization pass for numerical safety
    for (int r = 0; r < m; ++r) v -= q.col(r).dot(v) * q.col(r);
    if (v.norm() > tol * norm0) {
      q.col(m) = v / v.norm();
      kept.push_back(j);
      ++m;
    }
  }
  return kept;
}

}  // namespace

FactorReturnsResult factor_returns(const std::vector<FactorPanel>& factors,
                                   const ReturnPanel& returns) {
  const int k_count = static_cast<int>(factors.size());
  if (k_count == 0) throw ConfigError("factor_returns: no factors");
  const int t_rows = static_cast<int>(returns.returns.rows());
  const int n = static_cast<int>(returns.returns.cols());
  for (const auto& f : factors) {
    if (f.rows() != t_rows || f.cols() != n) {
      throw DomainError("factor_returns: factor not aligned to returns");
    }
  }

  FactorReturnsResult res;
  res.factor_returns = Matrix::Zero(t_rows, k_count);
  res.intercepts = Vector::Zero(t_rows);
  res.residuals = Matrix::Zero(t_rows, n);
  res.residual_mask = Mask::Constant(t_rows, n, false);
  res.dates_used = BoolRow::Constant(t_rows, false);

  std::vector<int> ids;
  ids.reserve(n);
  for (int t = 0; t < t_rows; ++t) {
    ids.clear();
    for (int i = 0; i < n; ++i) {
      bool ok = returns.mask(t, i);
      for (int f = 0; ok && f < k_count; ++f) ok = factors[f].mask(t, i);
      if (ok) ids.push_back(i);
    }
    const int m = static_cast<int>(ids.size());
    if (m < k_count + 1) continue;  // too few securities, date skipped

    // Exposures z-scored within the date; constant columns become zero and
    // are dropped as collinear with nothing to explain.
    Matrix exposures(m, k_count);
    Vector y(m);
    for (int r = 0; r < m; ++r) y[r] = returns.returns(t, ids[r]);
    for (int f = 0; f < k_count; ++f) {
      double mean = 0.0;
      for (int r = 0; r < m; ++r) mean += factors[f].values(t, ids[r]);
      mean /= m;
      double ss = 0.0;
      for (int r = 0; r < m; ++r) {
        const double d = factors[f].values(t, ids[r]) - mean;
        ss += d * d;
      }
      const double sd = std::sqrt(ss / (m - 1));
      for (int r = 0; r < m; ++r) {
        exposures(r, f) =
            sd > 0.0 ? (factors[f].values(t, ids[r]) - mean) / sd : 0.0;
      }
    }

    Matrix design(m, k_count + 1);
    design.col(0).setOnes();
    design.rightCols(k_count) = exposures;
    const std::vector<int> kept = independent_columns(design);
    Matrix reduced(m, kept.size());
    for (std::size_t c = 0; c < kept.size(); ++c) reduced.col(c) = design.col(kept[c]);
    for (int f = 0; f < k_count; ++f) {
      bool found = false;
      for (int c : kept) found = found || (c == f + 1);
      if (!found) res.dropped.emplace_back(t, f);
    }

    const Vector beta = reduced.colPivHouseholderQr().solve(y);
    const Vector fitted = reduced * beta;
    for (std::size_t c = 0; c < kept.size(); ++c) {
      if (kept[c] == 0) res.intercepts[t] = beta[static_cast<int>(c)];
      else res.factor_returns(t, kept[c] - 1) = beta[static_cast<int>(c)];
    }
    for (int r = 0; r < m; ++r) {
      res.residuals(t, ids[r]) = y[r] - fitted[r];
      res.residual_mask(t, ids[r]) = true;
    }
    res.dates_used[t] = true;
  }
  return res;
}

Matrix ewma_cov(const Matrix& factor_returns, double lambda) {
  return ewma_cov(factor_returns, lambda,
                  BoolRow::Constant(factor_returns.rows(), true));
}

Matrix ewma_cov(const Matrix& factor_returns, double lambda,
                const BoolRow& rows_used) {
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw ConfigError("ewma_cov: lambda must be in (0, 1)");
  }
  const int t_rows = static_cast<int>(factor_returns.rows());
  const int k = static_cast<int>(factor_returns.cols());
  if (rows_used.size() != t_rows) {
    throw DomainError("ewma_cov: rows_used length mismatch");
  }
  int used = 0;
  for (int t = 0; t < t_rows; ++t) used += rows_used[t] ? 1 : 0;
  if (used < 1) throw DomainError("ewma_cov: no usable rows");

  Matrix omega = Matrix::Zero(k, k);
  double weight_sum = 0.0;
  double w = 1.0;  // (1-lambda) cancels in the renormalization
  for (int t = t_rows - 1; t >= 0; --t) {
    if (!rows_used[t]) continue;
    const Vector f = factor_returns.row(t).transpose();
    omega += w * (f * f.transpose());
    weight_sum += w;
    w *= lambda;
  }
  omega /= weight_sum;
  // enforce exact symmetry against accumulation asymmetries
  omega = ((omega + omega.transpose()) * 0.5).eval();
  return omega;
}

Vector idio_variance(const Matrix& residuals, const Mask& mask,
                     double floor_value) {
  const int t_rows = static_cast<int>(residuals.rows());
  const int n = static_cast<int>(residuals.cols());
  Vector out = Vector::Constant(n, floor_value);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    int count = 0;
    for (int t = 0; t < t_rows; ++t) {
      if (mask(t, i)) { sum += residuals(t, i); ++count; }
    }
    if (count < 2) continue;  // floored default, flagged by the floor itself
    const double mean = sum / count;
    double ss = 0.0;
    for (int t = 0; t < t_rows; ++t) {
      if (mask(t, i)) {
        const double d = residuals(t, i) - mean;
        ss += d * d;
      }
    }
    out[i] = std::max(floor_value, ss / (count - 1));
  }
  return out;
}

std::shared_ptr<CovOperator> assemble(const Matrix& loadings,
                                      const Matrix& factor_cov,
                                      const Vector& idio_var, double epsilon) {
  if (epsilon < 0.0) throw ConfigError("assemble: epsilon must be >= 0");
  return std::make_shared<StructuredCov>(loadings, factor_cov, idio_var,
                                         epsilon);
}

std::shared_ptr<CovOperator> assemble(const RiskModel& model) {
  return assemble(model.loadings, model.factor_cov, model.idio_var,
                  model.epsilon);
}

void write_risk_model(const RiskModel& model,
                      const std::vector<std::string>& securities,
                      const std::string& dir) {
  std::filesystem::create_directories(dir);
  const int n = static_cast<int>(model.loadings.rows());
  const int k = static_cast<int>(model.loadings.cols());
  {
    std::ofstream out(dir + "/loadings.csv");
    if (!out) throw ConfigError("cannot write " + dir + "/loadings.csv");
    out << "security_id";
    for (int f = 0; f < k; ++f) {
      out << ',' << (f < static_cast<int>(model.factor_names.size())
                         ? model.factor_names[f]
                         : "factor" + std::to_string(f));
    }
    out << '\n';
    for (int i = 0; i < n; ++i) {
      out << securities[i];
      for (int f = 0; f < k; ++f) out << ',' << format_double(model.loadings(i, f));
      out << '\n';
    }
  }
  {
    std::ofstream out(dir + "/factor_cov.csv");
    if (!out) throw ConfigError("cannot write " + dir + "/factor_cov.csv");
    out << "epsilon," << format_double(model.epsilon) << '\n';
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) {
        out << format_double(model.factor_cov(a, b)) << (b + 1 < k ? ',' : '\n');
      }
      if (k == 0) out << '\n';
    }
  }
  {
    std::ofstream out(dir + "/idio_var.csv");
    if (!out) throw ConfigError("cannot write " + dir + "/idio_var.csv");
    out << "security_id,idio_var\n";
    for (int i = 0; i < n; ++i) {
      out << securities[i] << ',' << format_double(model.idio_var[i]) << '\n';
    }
  }
}

RiskModel read_risk_model(const std::string& dir,
                          std::vector<std::string>* securities) {
  RiskModel model;
  CsvTable loadings = read_csv(dir + "/loadings.csv");
  const int n = static_cast<int>(loadings.rows.size());
  const int k = static_cast<int>(loadings.header.size()) - 1;
  if (k < 0) throw ParseError(dir + "/loadings.csv: malformed header");
  model.loadings = Matrix(n, k);
  model.factor_names.assign(loadings.header.begin() + 1, loadings.header.end());
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) {
    ids.push_back(loadings.rows[i][0]);
    for (int f = 0; f < k; ++f) {
      model.loadings(i, f) =
          parse_double(loadings.rows[i][f + 1], loadings.line_numbers[i]);
    }
  }

  std::ifstream cov_in(dir + "/factor_cov.csv");
  if (!cov_in) throw ConfigError("cannot open " + dir + "/factor_cov.csv");
  std::string line;
  std::getline(cov_in, line);
  if (line.rfind("epsilon,", 0) != 0) {
    throw ParseError(dir + "/factor_cov.csv: expected epsilon header");
  }
  model.epsilon = parse_double(line.substr(8), 1);
  model.factor_cov = Matrix::Zero(k, k);
  for (int a = 0; a < k; ++a) {
    if (!std::getline(cov_in, line)) {
      throw ParseError(dir + "/factor_cov.csv: truncated matrix");
    }
    std::size_t pos = 0;
    for (int b = 0; b < k; ++b) {
      std::size_t comma = line.find(',', pos);
      const std::string cell = line.substr(pos, comma == std::string::npos
                                                    ? std::string::npos
                                                    : comma - pos);
      model.factor_cov(a, b) = parse_double(cell, a + 2);
      pos = comma == std::string::npos ? line.size() : comma + 1;
    }
  }

  CsvTable idio = read_csv(dir + "/idio_var.csv");
  model.idio_var = Vector(n);
  for (int i = 0; i < n; ++i) {
    if (idio.rows[i][0] != ids[i]) {
      throw ParseError(dir + "/idio_var.csv: security order mismatch");
    }
    model.idio_var[i] = parse_double(idio.rows[i][1], idio.line_numbers[i]);
  }
  if (securities != nullptr) *securities = std::move(ids);
  return model;
}

}  // namespace crossalpha
