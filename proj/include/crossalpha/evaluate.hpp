#pragma once

#include <map>
#include <string>
#include <vector>

#include "crossalpha/factor.hpp"
#include "crossalpha/panel.hpp"

namespace crossalpha {

enum class CorrMethod { pearson, spearman };

/// Per-date cross-sectional correlation between factor values and forward
/// returns. NaN marks dates with fewer than 3 jointly valid securities or
/// zero cross-sectional variance on either side. Spearman is Pearson on
/// cross_rank-transformed inputs.
Vector information_coefficient(const FactorPanel& f, const ReturnPanel& r,
                               CorrMethod method);

/// mean(IC) / sample-std(IC) over non-missing entries; throws DomainError
/// when fewer than 2 values remain or the dispersion is zero.
double information_ratio(const Vector& ic_series);

struct FactorReport {
  std::string factor;
  Vector ic_series;  // NaN = missing
  double mean_ic = 0.0;
  double ic_std = 0.0;
  double ir = 0.0;  // NaN when undefined (zero dispersion)
  double positive_ic_rate = 0.0;
  std::map<int, double> decay_profile;  // horizon -> mean IC
  int n_dates_used = 0;
};

/// Mean IC against forward returns at each horizon.
std::map<int, double> ic_decay(const FactorPanel& f, const PricePanel& panel,
                               const std::vector<int>& horizons,
                               CorrMethod method);

/// Trailing-window mean of the IC series (missing entries skipped); NaN
/// until the window holds at least 2 observations. Full-sample statistics
/// stay the headline numbers; this is the optional stability view.
Vector rolling_ic(const Vector& ic_series, int window = 60);

FactorReport evaluate_factor(const FactorPanel& f, const PricePanel& panel,
                             int horizon, CorrMethod method,
                             const std::vector<int>& decay_horizons = {1, 5, 10, 20});

struct QualityThresholds {
  double min_abs_mean_ic = 0.0;
  double min_ir = 0.0;
  double min_positive_rate = 0.0;
};

/// Keeps factors with |mean IC|, |IR| and directional consistency above the
/// thresholds; input order preserved.
std::vector<std::string> quality_filter(const std::vector<FactorReport>& reports,
                                        const QualityThresholds& thresholds);

void write_reports_csv(const std::vector<FactorReport>& reports,
                       const std::string& path);

}  // namespace crossalpha
