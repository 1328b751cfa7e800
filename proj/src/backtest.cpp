#include "crossalpha/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "crossalpha/csv.hpp"
#include "crossalpha/errors.hpp"
#include "crossalpha/log.hpp"
#include "crossalpha/risk.hpp"

namespace crossalpha {

void BacktestConfig::validate(int panel_rows) const {
  if (rebalance_every < 1) throw ConfigError("backtest: rebalance_every >= 1");
  if (retrain_every < 1) throw ConfigError("backtest: retrain_every >= 1");
  if (risk_window < 3) throw ConfigError("backtest: risk_window too small");
  if (cost_rate < 0.0) throw ConfigError("backtest: cost_rate must be >= 0");
  if (periods_per_year < 1) throw ConfigError("backtest: periods_per_year >= 1");
  const int te = resolved_train_end(panel_rows);
  const int tst = resolved_test_end(panel_rows);
  if (train_start < 0 || te <= train_start) {
    throw ConfigError("backtest: empty training window");
  }
  const int first_reb = te + resolved_purge_gap() + 1;
  if (first_reb + 1 > tst) {
    throw ConfigError("backtest: no test dates after the purge gap");
  }
}

int BacktestConfig::resolved_train_end(int panel_rows) const {
  return train_end >= 0 ? train_end : (panel_rows * 3) / 5;
}

int BacktestConfig::resolved_test_end(int panel_rows) const {
  return test_end >= 0 ? test_end : panel_rows - 1;
}

int BacktestConfig::resolved_purge_gap() const {
  return purge_gap >= 0 ? purge_gap : rebalance_every;
}

namespace {

std::vector<FactorPanel> lag_one_day(const std::vector<FactorPanel>& factors) {
  std::vector<FactorPanel> out = factors;
  for (auto& f : out) {
    const int t = f.rows();
    f.values.bottomRows(t - 1) = f.values.topRows(t - 1).eval();
    f.mask.bottomRows(t - 1) = f.mask.topRows(t - 1).eval();
    f.values.row(0).setZero();
    f.mask.row(0).setConstant(false);
    f.lineage.push_back("lag(1)");
  }
  return out;
}

/// Row slice [begin, end] of factors/returns repackaged as small panels so
/// the risk regressions see only the estimation window.
std::vector<FactorPanel> slice_factors(const std::vector<FactorPanel>& factors,
                                       int begin, int end) {
  std::vector<FactorPanel> out;
  out.reserve(factors.size());
  for (const auto& f : factors) {
    FactorPanel s;
    s.name = f.name;
    s.values = f.values.middleRows(begin, end - begin + 1);
    s.mask = f.mask.middleRows(begin, end - begin + 1);
    out.push_back(std::move(s));
  }
  return out;
}

ReturnPanel slice_returns(const ReturnPanel& r, int begin, int end) {
  ReturnPanel out;
  out.horizon = r.horizon;
  out.alignment = r.alignment;
  out.returns = r.returns.middleRows(begin, end - begin + 1);
  out.mask = r.mask.middleRows(begin, end - begin + 1);
  return out;
}

}  // namespace

BacktestResult run_backtest(const PricePanel& panel,
                            const std::vector<FactorPanel>& factors,
                            const BacktestConfig& cfg) {
  const int t_rows = panel.rows();
  const int n = panel.cols();
  const int k = static_cast<int>(factors.size());
  if (k == 0) throw ConfigError("backtest: no factors");
  cfg.validate(t_rows);
  for (const auto& f : factors) {
    if (f.rows() != t_rows || f.cols() != n) {
      throw DomainError("backtest: factor not aligned to panel");
    }
  }

  const int h = cfg.rebalance_every;
  const int train_end = cfg.resolved_train_end(t_rows);
  const int test_end = cfg.resolved_test_end(t_rows);
  const int purge = cfg.resolved_purge_gap();
  // Labels span h days, so the fit window must stay at least h behind the
  // decision date regardless of the configured purge.
  const int effective_purge = std::max(purge, h);
  const int first_reb = train_end + purge + 1;

  const ReturnPanel fwd = forward_returns(panel, h);
  const ReturnPanel daily = daily_returns(panel);
  const std::vector<FactorPanel> lagged = lag_one_day(factors);
  const double eps_daily = cfg.risk_epsilon_annual / cfg.periods_per_year;

  BacktestResult result;
  result.dates.push_back(first_reb);
  std::vector<double> equity{1.0};
  Vector w_full = Vector::Zero(n);
  CombinerModel model;
  bool model_ready = false;
  int last_fit = -1;
  PortfolioSolution prev_solution;

  for (int t = first_reb; t + 1 <= test_end; t += h) {
    if (!model_ready || t - last_fit >= cfg.retrain_every) {
      const int fit_end_excl = t - effective_purge + 1;
      model = fit_combiner(factors, fwd, cfg.train_start, fit_end_excl,
                           cfg.ridge_lambda, cfg.combiner_standardize);
      model_ready = true;
      last_fit = t;
    }
    const Vector mu = predict(model, factors, t);

    std::vector<int> active;
    for (int i = 0; i < n; ++i) {
      if (panel.mask(t, i) && std::isfinite(mu[i])) active.push_back(i);
    }
    if (active.size() < 4) {
      throw DomainError("backtest: fewer than 4 tradable names at date " +
                        panel.dates[t]);
    }
    const int na = static_cast<int>(active.size());

    // Risk model over the trailing window, exposures lagged one day.
    const int w_begin = std::max(1, t - cfg.risk_window + 1);
    const FactorReturnsResult fr = factor_returns(
        slice_factors(lagged, w_begin, t), slice_returns(daily, w_begin, t));
    const Matrix omega = ewma_cov(fr.factor_returns, cfg.risk_ewma_lambda,
                                  fr.dates_used);
    const Vector idio = idio_variance(fr.residuals, fr.residual_mask,
                                      cfg.idio_floor);

    // Exposures at the decision date, z-scored over the active set.
    Matrix b_active(na, k);
    for (int f = 0; f < k; ++f) {
      double mean = 0.0;
      for (int a = 0; a < na; ++a) mean += factors[f].values(t, active[a]);
      mean /= na;
      double ss = 0.0;
      for (int a = 0; a < na; ++a) {
        const double d = factors[f].values(t, active[a]) - mean;
        ss += d * d;
      }
      const double sd = na > 1 ? std::sqrt(ss / (na - 1)) : 0.0;
      for (int a = 0; a < na; ++a) {
        b_active(a, f) =
            sd > 0.0 ? (factors[f].values(t, active[a]) - mean) / sd : 0.0;
      }
    }

    PortfolioProblem prob;
    prob.mu_hat = Vector(na);
    prob.costs = Vector::Constant(
        na, cfg.solver_cost_rate >= 0.0 ? cfg.solver_cost_rate : cfg.cost_rate);
    prob.prev_weights = Vector(na);
    prob.sectors = Eigen::VectorXi(na);
    Vector idio_active(na);
    for (int a = 0; a < na; ++a) {
      prob.mu_hat[a] = mu[active[a]];
      prob.prev_weights[a] = w_full[active[a]];
      prob.sectors[a] = panel.industry[active[a]];
      idio_active[a] = idio[active[a]];
    }
    // Holding-period risk: h days of the daily factor/idio covariance.
    prob.risk = assemble(b_active, omega * static_cast<double>(h),
                         idio_active * static_cast<double>(h), eps_daily * h);
    prob.lambda_risk = cfg.lambda_risk;
    prob.gamma_tc = cfg.gamma_tc;
    prob.w_max = cfg.w_max;
    prob.leverage = cfg.leverage;

    double exited_turnover = 0.0;
    {
      std::vector<bool> is_active(n, false);
      for (int a : active) is_active[a] = true;
      for (int i = 0; i < n; ++i) {
        if (!is_active[i] && w_full[i] != 0.0) {
          exited_turnover += std::abs(w_full[i]);
          w_full[i] = 0.0;  // force-liquidated; cost charged below
        }
      }
    }

    SolverOptions opts;
    opts.tol = cfg.solver_tol;
    opts.max_iter = cfg.solver_max_iter;
    std::optional<PortfolioSolution> warm;
    if (t != first_reb) {
      PortfolioSolution w0;
      w0.weights = prob.prev_weights;
      w0.rho = 0.0;
      warm = std::move(w0);
    }
    const PortfolioSolution sol = solve(prob, warm, opts);

    double turnover = exited_turnover;
    if (sol.status == SolveStatus::optimal) {
      for (int a = 0; a < na; ++a) {
        turnover += std::abs(sol.weights[a] - prob.prev_weights[a]);
        w_full[active[a]] = sol.weights[a];
      }
      prev_solution = sol;
    } else {
      result.infeasible_dates.push_back(t);
      log_warn("backtest: solver returned non-optimal at " + panel.dates[t] +
               ", holding previous weights");
    }
    result.rebalance_dates.push_back(t);
    result.turnover_history.push_back(turnover);
    result.weights_history.emplace_back(t, w_full);

    // Hold through the close of the next rebalance (or the test end).
    const int hold_end = std::min(t + h, test_end);
    for (int d = t + 1; d <= hold_end; ++d) {
      const double trade_cost =
          (d == t + 1) ? cfg.cost_rate * result.turnover_history.back() : 0.0;
      double port_ret = 0.0;
      double liquidation = 0.0;
      for (int i = 0; i < n; ++i) {
        if (w_full[i] == 0.0) continue;
        if (daily.mask(d, i)) {
          port_ret += w_full[i] * daily.returns(d, i);
        } else {
          // Delisted mid-hold: liquidated at the last valid close.
          liquidation += std::abs(w_full[i]);
          w_full[i] = 0.0;
        }
      }
      result.turnover_history.back() += liquidation;
      port_ret -= cfg.cost_rate * liquidation;
      equity.push_back(equity.back() * (1.0 + port_ret - trade_cost));
      result.dates.push_back(d);
    }
  }

  result.equity = Eigen::Map<Vector>(equity.data(), equity.size());
  result.period_returns = Vector(result.equity.size() - 1);
  for (int i = 0; i + 1 < result.equity.size(); ++i) {
    result.period_returns[i] = result.equity[i + 1] / result.equity[i] - 1.0;
  }
  result.metrics = compute_metrics(result.equity, cfg.periods_per_year);
  if (!result.turnover_history.empty()) {
    double sum = 0.0;
    for (double v : result.turnover_history) sum += v;
    result.metrics.mean_turnover = sum / result.turnover_history.size();
  }
  return result;
}

Metrics compute_metrics(const Vector& equity, int periods_per_year) {
  if (equity.size() < 2) {
    throw DomainError("compute_metrics: need at least 2 equity points");
  }
  for (int i = 0; i < equity.size(); ++i) {
    if (!(equity[i] > 0.0)) {
      throw DomainError("compute_metrics: equity must stay positive");
    }
  }
  Metrics m;
  const int periods = static_cast<int>(equity.size()) - 1;
  const double p = static_cast<double>(periods_per_year);
  m.annualized_return =
      std::pow(equity[equity.size() - 1] / equity[0], p / periods) - 1.0;

  Vector rets(periods);
  for (int i = 0; i < periods; ++i) rets[i] = equity[i + 1] / equity[i] - 1.0;
  const double mean = rets.mean();
  double ss = 0.0;
  for (int i = 0; i < periods; ++i) ss += (rets[i] - mean) * (rets[i] - mean);
  const double sd = periods > 1 ? std::sqrt(ss / (periods - 1)) : 0.0;
  m.annualized_vol = sd * std::sqrt(p);
  if (sd > 0.0) {
    m.sharpe = mean / sd * std::sqrt(p);
    m.information_ratio = m.sharpe;  // zero benchmark, zero risk-free rate
  }

  double peak = equity[0];
  for (int i = 0; i < equity.size(); ++i) {
    peak = std::max(peak, equity[i]);
    m.max_drawdown = std::max(m.max_drawdown, 1.0 - equity[i] / peak);
  }
  if (m.max_drawdown > 0.0) m.calmar = m.annualized_return / m.max_drawdown;
  return m;
}

AttributionReport attribution_report(const BacktestResult& result,
                                     const std::vector<FactorPanel>& factors,
                                     const PricePanel& panel) {
  const int k = static_cast<int>(factors.size());
  AttributionReport report;
  report.rows.resize(k);
  for (int f = 0; f < k; ++f) report.rows[f].factor = factors[f].name;
  if (result.dates.size() < 2) return report;

  const ReturnPanel daily = daily_returns(panel);
  const std::vector<FactorPanel> lagged = lag_one_day(factors);
  const int begin = result.dates[1];
  const int end = result.dates.back();
  const FactorReturnsResult fr = factor_returns(
      slice_factors(lagged, begin, end), slice_returns(daily, begin, end));

  std::size_t w_idx = 0;
  for (std::size_t di = 1; di < result.dates.size(); ++di) {
    const int d = result.dates[di];
    while (w_idx + 1 < result.weights_history.size() &&
           result.weights_history[w_idx + 1].first < d) {
      ++w_idx;
    }
    const Vector& w = result.weights_history[w_idx].second;
    const int row = d - begin;

    double total = 0.0;
    for (int i = 0; i < w.size(); ++i) {
      if (w[i] != 0.0 && daily.mask(d, i)) total += w[i] * daily.returns(d, i);
    }
    report.total += total;
    if (!fr.dates_used[row]) {
      report.residual += total;
      continue;
    }
    // Portfolio exposure uses the same within-date z-scores as the factor
    // return regression, restricted to that date's regression names.
    double systematic = 0.0;
    for (int f = 0; f < k; ++f) {
      double mean = 0.0;
      int count = 0;
      for (int i = 0; i < w.size(); ++i) {
        if (fr.residual_mask(row, i)) { mean += lagged[f].values(d, i); ++count; }
      }
      if (count < 2) continue;
      mean /= count;
      double ss = 0.0;
      for (int i = 0; i < w.size(); ++i) {
        if (fr.residual_mask(row, i)) {
          const double dev = lagged[f].values(d, i) - mean;
          ss += dev * dev;
        }
      }
      const double sd = std::sqrt(ss / (count - 1));
      if (!(sd > 0.0)) continue;
      double exposure = 0.0;
      for (int i = 0; i < w.size(); ++i) {
        if (w[i] != 0.0 && fr.residual_mask(row, i)) {
          exposure += w[i] * (lagged[f].values(d, i) - mean) / sd;
        }
      }
      const double contrib = exposure * fr.factor_returns(row, f);
      report.rows[f].contribution += contrib;
      systematic += contrib;
    }
    report.systematic += systematic;
    report.residual += total - systematic;
  }
  return report;
}

void write_backtest_bundle(const BacktestResult& result,
                           const AttributionReport& attribution,
                           const PricePanel& panel, const std::string& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir + "/equity.csv");
    if (!out) throw ConfigError("cannot write " + dir + "/equity.csv");
    out << "date,value\n";
    for (std::size_t i = 0; i < result.dates.size(); ++i) {
      out << panel.dates[result.dates[i]] << ','
          << format_double(result.equity[static_cast<int>(i)]) << '\n';
    }
  }
  {
    std::ofstream out(dir + "/weights.csv");
    if (!out) throw ConfigError("cannot write " + dir + "/weights.csv");
    out << "date,security_id,weight\n";
    for (const auto& [t, w] : result.weights_history) {
      for (int i = 0; i < w.size(); ++i) {
        if (w[i] != 0.0) {
          out << panel.dates[t] << ',' << panel.securities[i] << ','
              << format_double(w[i]) << '\n';
        }
      }
    }
  }
  {
    std::ofstream out(dir + "/metrics.csv");
    if (!out) throw ConfigError("cannot write " + dir + "/metrics.csv");
    out << "name,value\n";
    const Metrics& m = result.metrics;
    out << "annualized_return," << format_double(m.annualized_return) << '\n';
    out << "annualized_vol," << format_double(m.annualized_vol) << '\n';
    out << "sharpe," << (m.sharpe ? format_double(*m.sharpe) : "undefined") << '\n';
    out << "information_ratio,"
        << (m.information_ratio ? format_double(*m.information_ratio)
                                : "undefined") << '\n';
    out << "calmar," << (m.calmar ? format_double(*m.calmar) : "undefined") << '\n';
    out << "max_drawdown," << format_double(m.max_drawdown) << '\n';
    out << "mean_turnover," << format_double(m.mean_turnover) << '\n';
  }
  {
    std::ofstream out(dir + "/attribution.csv");
    if (!out) throw ConfigError("cannot write " + dir + "/attribution.csv");
    out << "factor,contribution\n";
    for (const auto& row : attribution.rows) {
      out << row.factor << ',' << format_double(row.contribution) << '\n';
    }
    out << "__systematic__," << format_double(attribution.systematic) << '\n';
    out << "__residual__," << format_double(attribution.residual) << '\n';
    out << "__total__," << format_double(attribution.total) << '\n';
  }
}

}  // namespace crossalpha
