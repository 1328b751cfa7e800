#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "crossalpha/backtest.hpp"
#include "crossalpha/errors.hpp"
#include "crossalpha/synth.hpp"
#include "oracles.hpp"

using namespace crossalpha;

namespace {

struct Market {
  PricePanel panel;
  std::vector<FactorPanel> factors;
};

Market make_market(std::uint64_t seed, int n = 40, int days = 420,
                   double strength = 0.3, int horizon = 10) {
  SynthMarketConfig cfg;
  cfg.n_securities = n;
  cfg.n_days = days;
  cfg.signal.strength = strength;
  cfg.signal.horizon = horizon;
  cfg.n_industries = 4;
  auto [panel, factor] = generate_market(cfg, seed);
  return {std::move(panel), {std::move(factor)}};
}

BacktestConfig small_config(int days) {
  BacktestConfig cfg;
  cfg.train_start = 0;
  cfg.train_end = days / 2;
  cfg.test_end = days - 1;
  cfg.rebalance_every = 10;
  cfg.retrain_every = 40;
  cfg.risk_window = 120;
  cfg.cost_rate = 0.0;
  cfg.w_max = 0.10;
  cfg.leverage = 2.0;
  cfg.lambda_risk = 4.0;
  cfg.gamma_tc = 1.0;
  return cfg;
}

}  // namespace

TEST_CASE("compute_metrics worked examples") {
  SUBCASE("peak-to-trough drawdown") {
    Vector equity(4);
    equity << 1.0, 1.2, 0.9, 1.1;
    const Metrics m = compute_metrics(equity, 252);
    CHECK(m.max_drawdown == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("constant growth has undefined sharpe") {
    Vector equity(13);
    equity[0] = 1.0;
    for (int i = 1; i < 13; ++i) equity[i] = equity[i - 1] * 1.01;
    const Metrics m = compute_metrics(equity, 12);
    CHECK(m.annualized_return ==
          doctest::Approx(std::pow(1.01, 12) - 1.0).epsilon(1e-12));
    CHECK_FALSE(m.sharpe.has_value());
    CHECK_FALSE(m.calmar.has_value());  // no drawdown either
  }
  SUBCASE("doubling over one year of daily points") {
    Vector equity(253);
    for (int i = 0; i < 253; ++i) {
      equity[i] = std::pow(2.0, static_cast<double>(i) / 252.0);
    }
    const Metrics m = compute_metrics(equity, 252);
    CHECK(m.annualized_return == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("needs two points and positive equity") {
    Vector one(1);
    one << 1.0;
    CHECK_THROWS_AS(compute_metrics(one, 252), DomainError);
    Vector bad(3);
    bad << 1.0, -0.5, 1.0;
    CHECK_THROWS_AS(compute_metrics(bad, 252), DomainError);
  }
}

TEST_CASE("backtest accounting identity and market neutrality") {
  Market mkt = make_market(1);
  BacktestConfig cfg = small_config(mkt.panel.rows());
  cfg.cost_rate = 0.002;
  const BacktestResult res = run_backtest(mkt.panel, mkt.factors, cfg);
  REQUIRE(res.equity.size() >= 2);
  CHECK(res.infeasible_dates.empty());

  const ReturnPanel daily = daily_returns(mkt.panel);
  std::size_t w_idx = 0;
  std::size_t reb_idx = 0;
  for (std::size_t di = 1; di < res.dates.size(); ++di) {
    const int d = res.dates[di];
    while (w_idx + 1 < res.weights_history.size() &&
           res.weights_history[w_idx + 1].first < d) {
      ++w_idx;
    }
    const Vector& w = res.weights_history[w_idx].second;

    // market-neutral book at every held date
    REQUIRE(std::abs(w.sum()) <= 1e-8);

    double port_ret = 0.0;
    for (int i = 0; i < w.size(); ++i) {
      if (w[i] != 0.0 && daily.mask(d, i)) port_ret += w[i] * daily.returns(d, i);
    }
    double cost = 0.0;
    if (reb_idx < res.rebalance_dates.size() &&
        res.rebalance_dates[reb_idx] == d - 1) {
      cost = cfg.cost_rate * res.turnover_history[reb_idx];
      ++reb_idx;
    }
    const double want = res.equity[di - 1] * (1.0 + port_ret - cost);
    REQUIRE(res.equity[di] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("identical config reproduces the result bit-exactly") {
  Market mkt = make_market(2);
  const BacktestConfig cfg = small_config(mkt.panel.rows());
  const BacktestResult a = run_backtest(mkt.panel, mkt.factors, cfg);
  const BacktestResult b = run_backtest(mkt.panel, mkt.factors, cfg);
  REQUIRE(a.equity.size() == b.equity.size());
  for (int i = 0; i < a.equity.size(); ++i) REQUIRE(a.equity[i] == b.equity[i]);
  REQUIRE(a.turnover_history == b.turnover_history);
}

TEST_CASE("truncating the future reproduces all earlier decisions") {
  Market mkt = make_market(3);
  const int days = mkt.panel.rows();
  BacktestConfig cfg = small_config(days);
  const BacktestResult full = run_backtest(mkt.panel, mkt.factors, cfg);

  const int cut = days - 60;  // drop the last 60 days
  PricePanel short_panel = mkt.panel;
  short_panel.dates.resize(cut);
  short_panel.open = mkt.panel.open.topRows(cut);
  short_panel.high = mkt.panel.high.topRows(cut);
  short_panel.low = mkt.panel.low.topRows(cut);
  short_panel.close = mkt.panel.close.topRows(cut);
  short_panel.volume = mkt.panel.volume.topRows(cut);
  short_panel.market_cap = mkt.panel.market_cap.topRows(cut);
  short_panel.mask = mkt.panel.mask.topRows(cut);
  FactorPanel short_factor = mkt.factors[0];
  short_factor.values = mkt.factors[0].values.topRows(cut);
  short_factor.mask = mkt.factors[0].mask.topRows(cut);
  BacktestConfig cut_cfg = cfg;
  cut_cfg.test_end = cut - 1;
  const BacktestResult part =
      run_backtest(short_panel, {short_factor}, cut_cfg);

  const int horizon = cut - 1 - cfg.resolved_purge_gap();
  for (std::size_t r = 0; r < part.weights_history.size(); ++r) {
    const auto& [t_part, w_part] = part.weights_history[r];
    if (t_part > horizon) continue;
    const auto& [t_full, w_full] = full.weights_history[r];
    REQUIRE(t_part == t_full);
    for (int i = 0; i < w_part.size(); ++i) {
      REQUIRE(w_part[i] == w_full[i]);  // bit-exact
    }
  }
}

TEST_CASE("doubling the accounting cost lowers net return, same turnover") {
  Market mkt = make_market(4);
  BacktestConfig cfg = small_config(mkt.panel.rows());
  cfg.solver_cost_rate = 0.0015;  // optimizer's view stays fixed
  cfg.cost_rate = 0.0015;
  const BacktestResult base = run_backtest(mkt.panel, mkt.factors, cfg);
  cfg.cost_rate = 0.0030;
  const BacktestResult doubled = run_backtest(mkt.panel, mkt.factors, cfg);
  REQUIRE(base.turnover_history.size() == doubled.turnover_history.size());
  double total_turnover = 0.0;
  for (std::size_t i = 0; i < base.turnover_history.size(); ++i) {
    REQUIRE(base.turnover_history[i] ==
            doctest::Approx(doubled.turnover_history[i]).epsilon(1e-12));
    total_turnover += base.turnover_history[i];
  }
  REQUIRE(total_turnover > 0.0);
  CHECK(doubled.equity[doubled.equity.size() - 1] <
        base.equity[base.equity.size() - 1]);
}

TEST_CASE("metrics are recomputable from the equity curve") {
  Market mkt = make_market(5);
  const BacktestConfig cfg = small_config(mkt.panel.rows());
  const BacktestResult res = run_backtest(mkt.panel, mkt.factors, cfg);
  const Metrics again = compute_metrics(res.equity, cfg.periods_per_year);
  CHECK(res.metrics.annualized_return == again.annualized_return);
  CHECK(res.metrics.max_drawdown == again.max_drawdown);
  REQUIRE(res.metrics.sharpe.has_value());
  CHECK(*res.metrics.sharpe == *again.sharpe);
}

TEST_CASE("attribution identity: contributions plus residual equal total") {
  Market mkt = make_market(6);
  BacktestConfig cfg = small_config(mkt.panel.rows());
  const BacktestResult res = run_backtest(mkt.panel, mkt.factors, cfg);
  const AttributionReport rep =
      attribution_report(res, mkt.factors, mkt.panel);
  double contrib_sum = 0.0;
  for (const auto& row : rep.rows) contrib_sum += row.contribution;
  CHECK(contrib_sum == doctest::Approx(rep.systematic).epsilon(1e-10));
  CHECK(rep.systematic + rep.residual ==
        doctest::Approx(rep.total).epsilon(1e-8));
  // single-factor run: the factor's contribution is the whole systematic part
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].contribution == doctest::Approx(rep.systematic));
  // gross total matches the sum of period returns gross of costs
  double gross = 0.0;
  std::size_t reb_idx = 0;
  for (int i = 0; i < res.period_returns.size(); ++i) {
    double r = res.period_returns[i];
    if (reb_idx < res.rebalance_dates.size() &&
        res.dates[i + 1] == res.rebalance_dates[reb_idx] + 1) {
      r += cfg.cost_rate * res.turnover_history[reb_idx];
      ++reb_idx;
    }
    gross += r;
  }
  CHECK(rep.total == doctest::Approx(gross).epsilon(1e-8));
}

TEST_CASE("a factor with zero exposure contributes nothing") {
  Market mkt = make_market(7);
  // second factor: constant within each date (zero cross-sectional signal);
  // its per-date z-score is degenerate so exposures and contribution vanish
  FactorPanel flat = mkt.factors[0];
  flat.name = "flat";
  for (int t = 0; t < flat.rows(); ++t) flat.values.row(t).setConstant(1.0);
  mkt.factors.push_back(flat);
  BacktestConfig cfg = small_config(mkt.panel.rows());
  const BacktestResult res = run_backtest(mkt.panel, mkt.factors, cfg);
  const AttributionReport rep =
      attribution_report(res, mkt.factors, mkt.panel);
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.rows[1].contribution == 0.0);
}

TEST_CASE("config validation fails fast") {
  Market mkt = make_market(8, 20, 120, 0.0, 5);
  BacktestConfig cfg;
  cfg.train_start = 0;
  cfg.train_end = 110;
  cfg.test_end = 119;
  cfg.rebalance_every = 10;
  CHECK_THROWS_AS(run_backtest(mkt.panel, mkt.factors, cfg), ConfigError);
  cfg.train_end = 10;
  cfg.rebalance_every = 0;
  CHECK_THROWS_AS(run_backtest(mkt.panel, mkt.factors, cfg), ConfigError);
}

TEST_CASE("result bundle writes all four CSVs") {
  Market mkt = make_market(9);
  BacktestConfig cfg = small_config(mkt.panel.rows());
  const BacktestResult res = run_backtest(mkt.panel, mkt.factors, cfg);
  const AttributionReport rep = attribution_report(res, mkt.factors, mkt.panel);
  const std::string dir = "/tmp/crossalpha_bundle";
  write_backtest_bundle(res, rep, mkt.panel, dir);
  for (const char* name :
       {"equity.csv", "weights.csv", "metrics.csv", "attribution.csv"}) {
    std::ifstream in(dir + "/" + name);
    CHECK(in.good());
  }
}
