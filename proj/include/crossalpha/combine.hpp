#pragma once

#include <string>
#include <vector>

#include "crossalpha/factor.hpp"
#include "crossalpha/panel.hpp"

namespace crossalpha {

/// Pooled cross-sectional ridge model mapping factor exposures to expected
/// forward returns. Standardization statistics are frozen from the training
/// window so prediction never sees future data.
struct CombinerModel {
  Vector weights;          // per-factor coefficients
  double intercept = 0.0;
  double ridge_lambda = 0.0;
  int train_begin = 0;     // date indices, [begin, end)
  int train_end = 0;
  Vector feature_mean;     // training-window standardization stats
  Vector feature_std;
  std::vector<std::string> factor_names;
  bool standardized = true;
};

/// weights = (X^T X + lambda I)^{-1} X^T y. The building block `fit` uses on
/// centered data; exposed for direct use on prepared design matrices.
Vector ridge_solve(const Matrix& x, const Vector& y, double lambda);

/// Ridge regression of h-day forward returns on exposures pooled over the
/// window [t_begin, t_end). Exposure columns are centered with pooled window
/// means (and scaled to unit std when standardize=true); the intercept is
/// recovered in raw exposure space and never penalized.
CombinerModel fit_combiner(const std::vector<FactorPanel>& factors,
                           const ReturnPanel& returns, int t_begin, int t_end,
                           double ridge_lambda, bool standardize = true);

/// mu_hat_i = intercept + sum_f exposure_f / feature_std_f * weight_f;
/// NaN where any exposure is missing.
Vector predict(const CombinerModel& model,
               const std::vector<FactorPanel>& factors, int t);

void write_combiner(const CombinerModel& model, const std::string& path);
CombinerModel read_combiner(const std::string& path);

}  // namespace crossalpha
