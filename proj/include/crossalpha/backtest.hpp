#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crossalpha/combine.hpp"
#include "crossalpha/factor.hpp"
#include "crossalpha/optimize.hpp"
#include "crossalpha/panel.hpp"

namespace crossalpha {

struct BacktestConfig {
  // Date indices into the panel: training data is [train_start, train_end],
  // trading runs from train_end + purge_gap + 1 through test_end.
  int train_start = 0;
  int train_end = -1;  // -1: 60% of the panel
  int test_end = -1;   // -1: last date

  int retrain_every = 60;
  int rebalance_every = 20;  // also the forecast horizon
  int purge_gap = -1;        // -1: use the forecast horizon
  double cost_rate = 0.0015;      // charged against equity at trade time
  double solver_cost_rate = -1.;  // cost the optimizer plans with; -1: cost_rate

  // combiner
  double ridge_lambda = 1.0;
  bool combiner_standardize = true;

  // risk model
  int risk_window = 250;
  double risk_ewma_lambda = 0.97;
  double risk_epsilon_annual = 1e-6;  // annualized return^2; scaled internally
  double idio_floor = 1e-8;

  // optimizer
  double lambda_risk = 8.0;
  double gamma_tc = 1.0;
  double w_max = 0.02;
  double leverage = 2.0;
  double solver_tol = 1e-8;
  int solver_max_iter = 50000;

  int periods_per_year = 252;

  void validate(int panel_rows) const;
  int resolved_train_end(int panel_rows) const;
  int resolved_test_end(int panel_rows) const;
  int resolved_purge_gap() const;
};

struct Metrics {
  double annualized_return = 0.0;
  double annualized_vol = 0.0;
  std::optional<double> sharpe;            // unset when return std is zero
  std::optional<double> information_ratio; // vs zero benchmark; equals sharpe
  std::optional<double> calmar;            // unset when drawdown is zero
  double max_drawdown = 0.0;
  double mean_turnover = 0.0;
};

struct BacktestResult {
  std::vector<int> dates;   // panel date indices covered by the equity curve
  Vector equity;            // starts at 1.0
  Vector period_returns;    // equity[t+1]/equity[t] - 1
  std::vector<std::pair<int, Vector>> weights_history;  // (date, full-N weights)
  std::vector<double> turnover_history;
  std::vector<int> rebalance_dates;
  std::vector<int> infeasible_dates;  // optimizer failures, previous weights held
  Metrics metrics;
};

/// Walk-forward loop: expanding-window combiner refits behind a purge gap,
/// risk model refreshed per rebalance, trades charged cost_rate * turnover
/// at execution. Deterministic for a fixed panel + config.
BacktestResult run_backtest(const PricePanel& panel,
                            const std::vector<FactorPanel>& factors,
                            const BacktestConfig& cfg);

/// Metrics from an equity curve alone (mean_turnover left at zero).
Metrics compute_metrics(const Vector& equity, int periods_per_year);

struct AttributionRow {
  std::string factor;
  double contribution = 0.0;  // sum over periods of exposure * factor return
};

struct AttributionReport {
  std::vector<AttributionRow> rows;
  double systematic = 0.0;  // sum of factor contributions
  double residual = 0.0;    // total minus systematic
  double total = 0.0;       // sum of period portfolio returns (gross of costs)
};

AttributionReport attribution_report(const BacktestResult& result,
                                     const std::vector<FactorPanel>& factors,
                                     const PricePanel& panel);

void write_backtest_bundle(const BacktestResult& result,
                           const AttributionReport& attribution,
                           const PricePanel& panel, const std::string& dir);

}  // namespace crossalpha
