#include "crossalpha/combine.hpp"

#include <cmath>
#include <fstream>

#include "crossalpha/csv.hpp"
#include "crossalpha/errors.hpp"

namespace crossalpha {

Vector ridge_solve(const Matrix& x, const Vector& y, double lambda) {
  if (x.rows() != y.size()) throw DomainError("ridge_solve: size mismatch");
  if (lambda < 0.0) throw ConfigError("ridge_solve: lambda must be >= 0");
  const int k = static_cast<int>(x.cols());
  Matrix gram = x.transpose() * x;
  gram += lambda * Matrix::Identity(k, k);
  const Vector rhs = x.transpose() * y;
  if (lambda > 0.0) {
    return gram.llt().solve(rhs);
  }
  // lambda = 0: plain least squares; tolerate rank deficiency.
  return x.completeOrthogonalDecomposition().solve(y);
}

CombinerModel fit_combiner(const std::vector<FactorPanel>& factors,
                           const ReturnPanel& returns, int t_begin, int t_end,
                           double ridge_lambda, bool standardize) {
  const int k = static_cast<int>(factors.size());
  if (k == 0) throw ConfigError("fit_combiner: no factors");
  const int t_rows = static_cast<int>(returns.returns.rows());
  if (t_begin < 0 || t_end > t_rows || t_begin >= t_end) {
    throw ConfigError("fit_combiner: empty or out-of-range window");
  }
  for (const auto& f : factors) {
    if (f.rows() != t_rows || f.cols() != returns.returns.cols()) {
      throw DomainError("fit_combiner: factor not aligned");
    }
  }

  // Pool jointly valid (date, security) samples over the window.
  std::vector<std::pair<int, int>> cells;
  for (int t = t_begin; t < t_end; ++t) {
    for (int i = 0; i < returns.returns.cols(); ++i) {
      bool ok = returns.mask(t, i);
      for (int f = 0; ok && f < k; ++f) ok = factors[f].mask(t, i);
      if (ok) cells.emplace_back(t, i);
    }
  }
  const int m = static_cast<int>(cells.size());
  if (m < k + 2) {
    throw DomainError("fit_combiner: need at least K+2 pooled observations");
  }

  CombinerModel model;
  model.ridge_lambda = ridge_lambda;
  model.train_begin = t_begin;
  model.train_end = t_end;
  model.standardized = standardize;
  model.feature_mean = Vector::Zero(k);
  model.feature_std = Vector::Ones(k);
  for (const auto& f : factors) model.factor_names.push_back(f.name);

  Matrix x(m, k);
  Vector y(m);
  for (int r = 0; r < m; ++r) {
    const auto [t, i] = cells[r];
    for (int f = 0; f < k; ++f) x(r, f) = factors[f].values(t, i);
    y[r] = returns.returns(t, i);
  }
  // Columns are always centered so the intercept is unpenalized; with
  // standardize=true they are scaled to unit pooled std as well.
  for (int f = 0; f < k; ++f) {
    const double mean = x.col(f).mean();
    model.feature_mean[f] = mean;
    if (standardize) {
      const double sd =
          std::sqrt((x.col(f).array() - mean).square().sum() / (m - 1));
      model.feature_std[f] = sd > 0.0 ? sd : 1.0;
    }
    x.col(f) = (x.col(f).array() - mean) / model.feature_std[f];
  }
  const double y_mean = y.mean();
  model.weights = ridge_solve(x, Vector(y.array() - y_mean), ridge_lambda);
  // Raw-space intercept: mu = intercept + sum_f (x_f / std_f) * w_f.
  double adjust = 0.0;
  for (int f = 0; f < k; ++f) {
    adjust += model.feature_mean[f] / model.feature_std[f] * model.weights[f];
  }
  model.intercept = y_mean - adjust;
  return model;
}

Vector predict(const CombinerModel& model,
               const std::vector<FactorPanel>& factors, int t) {
  const int k = static_cast<int>(model.weights.size());
  if (static_cast<int>(factors.size()) != k) {
    throw DomainError("predict: factor count mismatch");
  }
  const int n = factors[0].cols();
  Vector mu = Vector::Constant(n, std::nan(""));
  for (int i = 0; i < n; ++i) {
    bool ok = true;
    double acc = model.intercept;
    for (int f = 0; f < k; ++f) {
      if (!factors[f].mask(t, i)) { ok = false; break; }
      acc += factors[f].values(t, i) / model.feature_std[f] * model.weights[f];
    }
    if (ok) mu[i] = acc;
  }
  return mu;
}

void write_combiner(const CombinerModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << "factor,weight,feature_mean,feature_std\n";
  for (int f = 0; f < model.weights.size(); ++f) {
    out << model.factor_names[f] << ',' << format_double(model.weights[f])
        << ',' << format_double(model.feature_mean[f]) << ','
        << format_double(model.feature_std[f]) << '\n';
  }
  out << "__intercept__," << format_double(model.intercept) << ",0,1\n";
  out << "__ridge_lambda__," << format_double(model.ridge_lambda) << ",0,1\n";
  out << "__standardized__," << (model.standardized ? 1 : 0) << ",0,1\n";
}

CombinerModel read_combiner(const std::string& path) {
  CsvTable table = read_csv(path);
  CombinerModel model;
  std::vector<double> weights, means, stds;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const int line = table.line_numbers[r];
    const std::string& name = row[0];
    const double value = parse_double(row[1], line);
    if (name == "__intercept__") {
      model.intercept = value;
    } else if (name == "__ridge_lambda__") {
      model.ridge_lambda = value;
    } else if (name == "__standardized__") {
      model.standardized = value != 0.0;
    } else {
      model.factor_names.push_back(name);
      weights.push_back(value);
      means.push_back(parse_double(row[2], line));
      stds.push_back(parse_double(row[3], line));
    }
  }
  const int k = static_cast<int>(weights.size());
  model.weights = Eigen::Map<Vector>(weights.data(), k);
  model.feature_mean = Eigen::Map<Vector>(means.data(), k);
  model.feature_std = Eigen::Map<Vector>(stds.data(), k);
  return model;
}

}  // namespace crossalpha
