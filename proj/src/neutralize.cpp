#include "crossalpha/neutralize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "crossalpha/csv.hpp"
#include "crossalpha/errors.hpp"

namespace crossalpha {

namespace {

constexpr double kHuberC = 1.345;

/// Huber weights from residuals, scale = 1.4826 * median absolute residual.
Vector huber_weights(const Vector& residuals) {
  std::vector<double> abs_r(residuals.size());
  for (int i = 0; i < residuals.size(); ++i) abs_r[i] = std::abs(residuals[i]);
  std::vector<double> sorted = abs_r;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                   sorted.end());
  const double mad = sorted[sorted.size() / 2];
  const double scale = 1.4826 * mad;
  Vector w = Vector::Ones(residuals.size());
  if (scale <= 0.0) return w;
  const double cutoff = kHuberC * scale;
  for (int i = 0; i < residuals.size(); ++i) {
    if (abs_r[i] > cutoff) w[i] = cutoff / abs_r[i];
  }
  return w;
}

/// Least squares with optional Huber reweighting; rank-deficient designs
/// fall back to the complete orthogonal decomposition (pseudo-inverse).
Vector robust_lstsq(const Matrix& design, const Vector& y, bool huber) {
  auto solve_weighted = [&](const Vector& w) {
    Matrix xw = design;
    Vector yw = y;
    for (int i = 0; i < y.size(); ++i) {
      const double s = std::sqrt(w[i]);
      xw.row(i) *= s;
      yw[i] *= s;
    }
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(xw);
    return Vector(cod.solve(yw));
  };
  Vector beta = solve_weighted(Vector::Ones(y.size()));
  if (!huber) return beta;
  for (int iter = 0; iter < 10; ++iter) {
    const Vector residuals = y - design * beta;
    beta = solve_weighted(huber_weights(residuals));
  }
  return beta;
}

double sample_std(const double* begin, int count) {
  double mean = 0.0;
  for (int i = 0; i < count; ++i) mean += begin[i];
  mean /= count;
  double ss = 0.0;
  for (int i = 0; i < count; ++i) ss += (begin[i] - mean) * (begin[i] - mean);
  return std::sqrt(ss / (count - 1));
}

}  // namespace

void NeutralizationConfig::validate() const {
  if (alpha0 < 0.0 || alpha0 > 1.0) {
    throw ConfigError("neutralize: alpha0 must be in [0, 1]");
  }
  if (vol_window_short >= vol_window_long) {
    throw ConfigError("neutralize: vol_window_short must be < vol_window_long");
  }
  if (vol_window_short < 2) {
    throw ConfigError("neutralize: vol_window_short must be >= 2");
  }
  if (pca_k < 0) throw ConfigError("neutralize: pca_k must be >= 0");
}

void NeutralizationReport::write_csv(
    const std::string& path, const std::vector<std::string>& dates) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << "date,stage,coef_name,value\n";
  for (const auto& e : entries) {
    out << dates[e.t] << ',' << e.stage << ',' << e.coef << ','
        << format_double(e.value) << '\n';
  }
}

std::pair<FactorPanel, NeutralizationReport> industry_neutralize(
    const FactorPanel& f, const PricePanel& panel, const Vector& strength,
    bool huber) {
  const int t_rows = f.rows();
  const int n = f.cols();
  if (t_rows != panel.rows() || n != panel.cols()) {
    throw DomainError("industry_neutralize: factor not aligned to panel");
  }
  if (strength.size() != t_rows) {
    throw DomainError("industry_neutralize: strength series length mismatch");
  }
  const int j_count = panel.industries();

  FactorPanel out = f;
  out.lineage.push_back("industry_neutralize");
  NeutralizationReport report;

  std::vector<std::vector<int>> members(j_count);
  for (int t = 0; t < t_rows; ++t) {
    for (auto& m : members) m.clear();
    for (int i = 0; i < n; ++i) {
      if (f.mask(t, i)) members[panel.industry[i]].push_back(i);
    }
    const double a = strength[t];
    for (int j = 0; j < j_count; ++j) {
      if (members[j].empty()) continue;  // industry absent at this date
      const auto& ids = members[j];
      double beta;
      if (!huber) {
        double sum = 0.0;
        for (int i : ids) sum += f.values(t, i);
        beta = sum / static_cast<double>(ids.size());
      } else {
        Vector y(static_cast<int>(ids.size()));
        for (std::size_t k = 0; k < ids.size(); ++k) y[static_cast<int>(k)] = f.values(t, ids[k]);
        beta = robust_lstsq(Matrix::Ones(y.size(), 1), y, true)[0];
      }
      for (int i : ids) out.values(t, i) = f.values(t, i) - a * beta;
      report.entries.push_back({t, "industry", "beta_ind" + std::to_string(j), beta});
    }
    // residual diagnostic at full strength
    for (int j = 0; j < j_count; ++j) {
      if (members[j].empty()) continue;
      double mean = 0.0;
      for (int i : members[j]) mean += out.values(t, i);
      mean /= static_cast<double>(members[j].size());
      report.max_abs_industry_mean =
          std::max(report.max_abs_industry_mean, std::abs(mean));
    }
  }
  return {std::move(out), std::move(report)};
}

std::pair<FactorPanel, NeutralizationReport> size_neutralize(
    const FactorPanel& f, const PricePanel& panel, const Vector& strength,
    bool huber) {
  const int t_rows = f.rows();
  const int n = f.cols();
  if (t_rows != panel.rows() || n != panel.cols()) {
    throw DomainError("size_neutralize: factor not aligned to panel");
  }
  if (strength.size() != t_rows) {
    throw DomainError("size_neutralize: strength series length mismatch");
  }

  FactorPanel out = f;
  out.lineage.push_back("size_neutralize");
  NeutralizationReport report;

  std::vector<int> ids;
  ids.reserve(n);
  for (int t = 0; t < t_rows; ++t) {
    ids.clear();
    for (int i = 0; i < n; ++i) {
      if (f.mask(t, i) && panel.mask(t, i)) ids.push_back(i);
    }
    if (static_cast<int>(ids.size()) < 4) {
      report.skipped_dates.push_back(t);
      continue;
    }
    const int m = static_cast<int>(ids.size());
    Matrix design(m, 3);
    Vector y(m);
    for (int k = 0; k < m; ++k) {
      const double lm = std::log(panel.market_cap(t, ids[k]));
      design(k, 0) = 1.0;
      design(k, 1) = lm;
      design(k, 2) = lm * lm;
      y[k] = f.values(t, ids[k]);
    }
    const Vector beta = robust_lstsq(design, y, huber);
    const Vector fitted = design * beta;
    const double a = strength[t];
    for (int k = 0; k < m; ++k) {
      out.values(t, ids[k]) = y[k] - a * fitted[k];
    }
    report.entries.push_back({t, "size", "intercept", beta[0]});
    report.entries.push_back({t, "size", "gamma", beta[1]});
    report.entries.push_back({t, "size", "delta", beta[2]});
  }
  return {std::move(out), std::move(report)};
}

Vector adaptive_strength(const Vector& market_returns,
                         const NeutralizationConfig& cfg) {
  cfg.validate();
  const int t_rows = static_cast<int>(market_returns.size());
  if (t_rows <= cfg.vol_window_long) {
    throw ConfigError("adaptive_strength: series shorter than vol_window_long");
  }
  Vector alpha = Vector::Constant(t_rows, cfg.alpha0);
  if (cfg.beta_vol == 0.0) return alpha;

  std::vector<double> window;
  for (int t = cfg.vol_window_long - 1; t < t_rows; ++t) {
    bool ok = true;
    for (int s = t - cfg.vol_window_long + 1; s <= t; ++s) {
      if (!std::isfinite(market_returns[s])) { ok = false; break; }
    }
    if (!ok) continue;  // insufficient history -> alpha0
    const double sigma_long =
        sample_std(market_returns.data() + t - cfg.vol_window_long + 1,
                   cfg.vol_window_long);
    const double sigma_short =
        sample_std(market_returns.data() + t - cfg.vol_window_short + 1,
                   cfg.vol_window_short);
    if (sigma_long <= 0.0) continue;  // flagged as alpha0
    const double a =
        cfg.alpha0 *
        (1.0 + cfg.beta_vol * (sigma_short - sigma_long) / sigma_long);
    alpha[t] = std::clamp(a, 0.0, 1.0);
  }
  return alpha;
}

std::vector<FactorPanel> pca_neutralize(const std::vector<FactorPanel>& factors,
                                        int k) {
  const int n_factors = static_cast<int>(factors.size());
  if (k == 0) return factors;
  if (k >= n_factors) {
    throw ConfigError("pca_neutralize: k must be smaller than factor count");
  }
  const int t_rows = factors[0].rows();
  const int n = factors[0].cols();
  for (const auto& f : factors) {
    if (f.rows() != t_rows || f.cols() != n) {
      throw DomainError("pca_neutralize: factors not aligned");
    }
  }

  // Joint validity: a cell participates when every factor is valid there.
  Mask joint = factors[0].mask;
  for (int f = 1; f < n_factors; ++f) joint = joint && factors[f].mask;

  long count = 0;
  Vector mean = Vector::Zero(n_factors);
  for (int t = 0; t < t_rows; ++t) {
    for (int i = 0; i < n; ++i) {
      if (!joint(t, i)) continue;
      ++count;
      for (int f = 0; f < n_factors; ++f) mean[f] += factors[f].values(t, i);
    }
  }
  if (count < 2) throw DomainError("pca_neutralize: not enough joint data");
  mean /= static_cast<double>(count);
  Vector var = Vector::Zero(n_factors);
  for (int t = 0; t < t_rows; ++t) {
    for (int i = 0; i < n; ++i) {
      if (!joint(t, i)) continue;
      for (int f = 0; f < n_factors; ++f) {
        const double d = factors[f].values(t, i) - mean[f];
        var[f] += d * d;
      }
    }
  }
  var /= static_cast<double>(count);
  Vector inv_std(n_factors);
  for (int f = 0; f < n_factors; ++f) {
    inv_std[f] = var[f] > 0.0 ? 1.0 / std::sqrt(var[f]) : 0.0;
  }

  Matrix corr = Matrix::Zero(n_factors, n_factors);
  Vector z(n_factors);
  for (int t = 0; t < t_rows; ++t) {
    for (int i = 0; i < n; ++i) {
      if (!joint(t, i)) continue;
      for (int f = 0; f < n_factors; ++f) {
        z[f] = (factors[f].values(t, i) - mean[f]) * inv_std[f];
      }
      corr.selfadjointView<Eigen::Lower>().rankUpdate(z);
    }
  }
  corr /= static_cast<double>(count);
  corr = corr.selfadjointView<Eigen::Lower>();

  Eigen::SelfAdjointEigenSolver<Matrix> eig(corr);
  if (eig.info() != Eigen::Success) {
    throw DomainError("pca_neutralize: eigendecomposition failed");
  }
  // Eigenvalues ascend; the top-k span occupies the trailing columns.
  const Matrix top = eig.eigenvectors().rightCols(k);

  std::vector<FactorPanel> out;
  out.reserve(factors.size());
  for (int f = 0; f < n_factors; ++f) {
    FactorPanel g;
    g.name = factors[f].name;
    g.lineage = factors[f].lineage;
    g.lineage.push_back("pca_neutralize(k=" + std::to_string(k) + ")");
    g.values = Matrix::Zero(t_rows, n);
    g.mask = joint;
    out.push_back(std::move(g));
  }
  Vector proj(n_factors);
  for (int t = 0; t < t_rows; ++t) {
    for (int i = 0; i < n; ++i) {
      if (!joint(t, i)) continue;
      for (int f = 0; f < n_factors; ++f) {
        z[f] = (factors[f].values(t, i) - mean[f]) * inv_std[f];
      }
      proj = z - top * (top.transpose() * z);
      for (int f = 0; f < n_factors; ++f) out[f].values(t, i) = proj[f];
    }
  }
  return out;
}

std::pair<std::vector<FactorPanel>, NeutralizationReport> neutralize_pipeline(
    const std::vector<FactorPanel>& factors, const PricePanel& panel,
    const NeutralizationConfig& cfg) {
  cfg.validate();
  Vector strength;
  if (cfg.beta_vol != 0.0) {
    const ReturnPanel daily = daily_returns(panel);
    strength = adaptive_strength(market_returns(daily), cfg);
  } else {
    strength = Vector::Constant(panel.rows(), cfg.alpha0);
  }

  std::vector<FactorPanel> current = factors;
  NeutralizationReport merged;
  for (NeutralizeStage stage : cfg.stages) {
    if (stage == NeutralizeStage::pca) {
      current = pca_neutralize(current, cfg.pca_k);
      continue;
    }
    for (auto& f : current) {
      auto [g, rep] = stage == NeutralizeStage::industry
                          ? industry_neutralize(f, panel, strength, cfg.huber)
                          : size_neutralize(f, panel, strength, cfg.huber);
      for (auto& e : rep.entries) {
        e.coef = f.name + "." + e.coef;
        merged.entries.push_back(std::move(e));
      }
      for (int t : rep.skipped_dates) merged.skipped_dates.push_back(t);
      merged.max_abs_industry_mean =
          std::max(merged.max_abs_industry_mean, rep.max_abs_industry_mean);
      f = std::move(g);
    }
  }
  return {std::move(current), std::move(merged)};
}

}  // namespace crossalpha
