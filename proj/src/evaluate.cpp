#include "crossalpha/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "crossalpha/csv.hpp"
#include "crossalpha/errors.hpp"
#include "crossalpha/kernels.hpp"

namespace crossalpha {

namespace {

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) { mx += x[i]; my += y[i]; }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nan("");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

Vector information_coefficient(const FactorPanel& f, const ReturnPanel& r,
                               CorrMethod method) {
  const int t_rows = f.rows();
  const int n = f.cols();
  if (r.returns.rows() != t_rows || r.returns.cols() != n) {
    throw DomainError("information_coefficient: factor and returns not aligned");
  }
  if (r.alignment != ReturnAlignment::forward) {
    throw DomainError("information_coefficient: returns must be forward-aligned");
  }

  Matrix fv = f.values;
  Matrix rv = r.returns;
  if (method == CorrMethod::spearman) {
    fv = cross_rank(f.values, f.mask).first;
    rv = cross_rank(r.returns, r.mask).first;
  }

  Vector ic = Vector::Constant(t_rows, std::nan(""));
  std::vector<double> xs, ys;
  for (int t = 0; t < t_rows; ++t) {
    xs.clear();
    ys.clear();
    for (int i = 0; i < n; ++i) {
      if (f.mask(t, i) && r.mask(t, i)) {
        xs.push_back(fv(t, i));
        ys.push_back(rv(t, i));
      }
    }
    if (xs.size() < 3) continue;
    ic[t] = pearson(xs, ys);  // NaN when either side has zero variance
  }
  return ic;
}

double information_ratio(const Vector& ic_series) {
  std::vector<double> values;
  for (int t = 0; t < ic_series.size(); ++t) {
    if (std::isfinite(ic_series[t])) values.push_back(ic_series[t]);
  }
  if (values.size() < 2) {
    throw DomainError("information_ratio: need at least 2 IC observations");
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (static_cast<double>(values.size()) - 1.0));
  if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
    throw DomainError("information_ratio: zero IC dispersion");
  }
  return mean / sd;
}

std::map<int, double> ic_decay(const FactorPanel& f, const PricePanel& panel,
                               const std::vector<int>& horizons,
                               CorrMethod method) {
  std::map<int, double> profile;
  for (int h : horizons) {
    if (h >= panel.rows()) {
      throw ConfigError("ic_decay: horizon " + std::to_string(h) +
                        " too long for panel");
    }
    const ReturnPanel fwd = forward_returns(panel, h);
    const Vector ic = information_coefficient(f, fwd, method);
    double sum = 0.0;
    int count = 0;
    for (int t = 0; t < ic.size(); ++t) {
      if (std::isfinite(ic[t])) { sum += ic[t]; ++count; }
    }
    profile[h] = count > 0 ? sum / count : std::nan("");
  }
  return profile;
}

Vector rolling_ic(const Vector& ic_series, int window) {
  if (window < 2) throw ConfigError("rolling_ic: window must be >= 2");
  const int t_rows = static_cast<int>(ic_series.size());
  Vector out = Vector::Constant(t_rows, std::nan(""));
  for (int t = 0; t < t_rows; ++t) {
    double sum = 0.0;
    int count = 0;
    for (int s = std::max(0, t - window + 1); s <= t; ++s) {
      if (std::isfinite(ic_series[s])) {
        sum += ic_series[s];
        ++count;
      }
    }
    if (count >= 2) out[t] = sum / count;
  }
  return out;
}

FactorReport evaluate_factor(const FactorPanel& f, const PricePanel& panel,
                             int horizon, CorrMethod method,
                             const std::vector<int>& decay_horizons) {
  FactorReport report;
  report.factor = f.name;
  const ReturnPanel fwd = forward_returns(panel, horizon);
  report.ic_series = information_coefficient(f, fwd, method);

  double sum = 0.0;
  int count = 0;
  int positive = 0;
  for (int t = 0; t < report.ic_series.size(); ++t) {
    const double v = report.ic_series[t];
    if (!std::isfinite(v)) continue;
    sum += v;
    ++count;
    if (v > 0.0) ++positive;
  }
  report.n_dates_used = count;
  report.mean_ic = count > 0 ? sum / count : std::nan("");
  double ss = 0.0;
  for (int t = 0; t < report.ic_series.size(); ++t) {
    const double v = report.ic_series[t];
    if (std::isfinite(v)) ss += (v - report.mean_ic) * (v - report.mean_ic);
  }
  report.ic_std = count > 1 ? std::sqrt(ss / (count - 1)) : std::nan("");
  report.ir = (count > 1 && report.ic_std > 0.0) ? report.mean_ic / report.ic_std
                                                 : std::nan("");
  report.positive_ic_rate =
      count > 0 ? static_cast<double>(positive) / count : 0.0;
  report.decay_profile = ic_decay(f, panel, decay_horizons, method);
  return report;
}

std::vector<std::string> quality_filter(const std::vector<FactorReport>& reports,
                                        const QualityThresholds& thresholds) {
  std::vector<std::string> accepted;
  for (const auto& r : reports) {
    const double consistency =
        std::max(r.positive_ic_rate, 1.0 - r.positive_ic_rate);
    if (std::abs(r.mean_ic) >= thresholds.min_abs_mean_ic &&
        std::abs(r.ir) >= thresholds.min_ir &&
        consistency >= thresholds.min_positive_rate) {
      accepted.push_back(r.factor);
    }
  }
  return accepted;
}

void write_reports_csv(const std::vector<FactorReport>& reports,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << "factor,mean_ic,ic_std,ir,positive_ic_rate,n_dates\n";
  for (const auto& r : reports) {
    out << r.factor << ',' << format_double(r.mean_ic) << ','
        << format_double(r.ic_std) << ',' << format_double(r.ir) << ','
        << format_double(r.positive_ic_rate) << ',' << r.n_dates_used << '\n';
  }
}

}  // namespace crossalpha
