#pragma once

#include <string>
#include <utility>
#include <vector>

#include "crossalpha/factor.hpp"
#include "crossalpha/panel.hpp"

namespace crossalpha {

enum class NeutralizeStage { industry, size, pca };

struct NeutralizationConfig {
  double alpha0 = 1.0;   // base strength, in [0, 1]
  double beta_vol = 0.0; // volatility sensitivity
  int vol_window_short = 20;
  int vol_window_long = 120;
  std::vector<NeutralizeStage> stages{NeutralizeStage::industry,
                                      NeutralizeStage::size};
  int pca_k = 0;
  bool huber = false;  // Huber-weighted regression (c = 1.345) for size stage

  void validate() const;
};

/// Per-date regression coefficients and diagnostics from one stage.
struct NeutralizationReport {
  struct Entry {
    int t;
    std::string stage;
    std::string coef;  // e.g. "beta_ind3", "gamma", "delta", "intercept"
    double value;
  };
  std::vector<Entry> entries;
  std::vector<int> skipped_dates;       // stage could not run, flagged
  double max_abs_industry_mean = 0.0;   // residual diagnostic (industry stage)

  void write_csv(const std::string& path,
                 const std::vector<std::string>& dates) const;
};

/// Per-date cross-sectional regression of the factor on industry dummies;
/// output is f - strength_t * fitted. At strength 1 the per-industry means
/// of the output are zero. Industries with no valid member at a date are
/// skipped for that date.
std::pair<FactorPanel, NeutralizationReport> industry_neutralize(
    const FactorPanel& f, const PricePanel& panel, const Vector& strength,
    bool huber = false);

/// Per-date regression of the factor on [1, log mcap, (log mcap)^2]; output
/// is f - strength_t * fitted (intercept included in the fitted part).
/// Degenerate designs fall back to the pseudo-inverse; dates with fewer than
/// 4 valid securities are skipped and flagged.
std::pair<FactorPanel, NeutralizationReport> size_neutralize(
    const FactorPanel& f, const PricePanel& panel, const Vector& strength,
    bool huber = false);

/// alpha_t = alpha0 * (1 + beta_vol * (sigma_short - sigma_long)/sigma_long),
/// clamped to [0, 1]. Dates with insufficient history or zero long vol use
/// alpha0.
Vector adaptive_strength(const Vector& market_returns,
                         const NeutralizationConfig& cfg);

/// Removes the top-k eigenvector span of the factor correlation matrix from
/// each (date, security) factor vector. k = 0 returns the input unchanged;
/// for k > 0 the outputs are residuals of the standardized factors.
std::vector<FactorPanel> pca_neutralize(const std::vector<FactorPanel>& factors,
                                        int k);

/// Runs the configured stages in order, reusing one strength series.
std::pair<std::vector<FactorPanel>, NeutralizationReport> neutralize_pipeline(
    const std::vector<FactorPanel>& factors, const PricePanel& panel,
    const NeutralizationConfig& cfg);

}  // namespace crossalpha
