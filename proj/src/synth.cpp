#include "crossalpha/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "crossalpha/errors.hpp"
#include "crossalpha/parallel.hpp"
#include "crossalpha/rng.hpp"

namespace crossalpha {

std::vector<double> simulate_gbm(const GbmParams& params, int steps,
                                 std::uint64_t seed) {
  if (steps < 1) throw ConfigError("simulate_gbm: steps must be >= 1");
  if (params.sigma < 0.0 || params.dt <= 0.0 || params.s0 <= 0.0) {
    throw ConfigError("simulate_gbm: invalid parameters");
  }
  Rng rng(seed);
  std::vector<double> path(static_cast<std::size_t>(steps) + 1);
  path[0] = params.s0;
  const double drift = (params.mu - 0.5 * params.sigma * params.sigma) * params.dt;
  const double diffusion = params.sigma * std::sqrt(params.dt);
  for (int i = 0; i < steps; ++i) {
    path[i + 1] = path[i] * std::exp(drift + diffusion * rng.next_normal());
  }
  return path;
}

GbmParams estimate_gbm(const std::vector<double>& path, double dt) {
  if (path.size() < 3) throw DomainError("estimate_gbm: path too short");
  if (dt <= 0.0) throw ConfigError("estimate_gbm: dt must be positive");
  const int n = static_cast<int>(path.size()) - 1;
  std::vector<double> log_returns(n);
  for (int i = 0; i < n; ++i) {
    if (!(path[i] > 0.0) || !(path[i + 1] > 0.0)) {
      throw DomainError("estimate_gbm: non-positive price at step " +
                        std::to_string(i));
    }
    log_returns[i] = std::log(path[i + 1] / path[i]);
  }
  double m = 0.0;
  for (double r : log_returns) m += r;
  m /= n;
  double v = 0.0;
  for (double r : log_returns) v += (r - m) * (r - m);
  v /= (n - 1);

  GbmParams est;
  est.dt = dt;
  est.s0 = path[0];
  est.sigma = std::sqrt(v / dt);
  est.mu = m / dt + 0.5 * est.sigma * est.sigma;
  return est;
}

std::pair<PricePanel, FactorPanel> generate_market(const SynthMarketConfig& cfg,
                                                   std::uint64_t seed) {
  if (cfg.n_securities < 2) {
    throw ConfigError("generate_market: need at least 2 securities");
  }
  if (cfg.n_days <= cfg.signal.horizon) {
    throw ConfigError("generate_market: n_days must exceed signal horizon");
  }
  if (cfg.signal.strength < 0.0 || cfg.signal.strength > 1.0) {
    throw ConfigError("generate_market: signal strength must be in [0,1]");
  }
  auto check_range = [](std::pair<double, double> r, const char* name) {
    if (r.first > r.second) {
      throw ConfigError(std::string("generate_market: degenerate range for ") +
                        name);
    }
  };
  check_range(cfg.ranges.mu, "mu");
  check_range(cfg.ranges.sigma, "sigma");
  check_range(cfg.ranges.s0, "s0");
  if (cfg.n_industries < 1) {
    throw ConfigError("generate_market: need at least one industry");
  }

  const int t = cfg.n_days;
  const int n = cfg.n_securities;
  PricePanel panel;
  panel.dates.reserve(t);
  // Synthetic calendar: sequential ISO dates starting 2015-01-01. Only
  // ordering matters downstream.
  {
    int y = 2015, mo = 1, d = 1;
    static const int days_in_month[12] = {31, 28, 31, 30, 31, 30,
                                          31, 31, 30, 31, 30, 31};
    for (int i = 0; i < t; ++i) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, mo, d);
      panel.dates.emplace_back(buf);
      if (++d > days_in_month[mo - 1]) {
        d = 1;
        if (++mo > 12) { mo = 1; ++y; }
      }
    }
  }
  panel.securities.reserve(n);
  for (int i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "S%04d", i);
    panel.securities.emplace_back(buf);
  }
  panel.open = Matrix(t, n);
  panel.high = Matrix(t, n);
  panel.low = Matrix(t, n);
  panel.close = Matrix(t, n);
  panel.volume = Matrix(t, n);
  panel.market_cap = Matrix(t, n);
  panel.industry = Eigen::VectorXi(n);
  panel.mask = Mask::Constant(t, n, true);

  // Securities are independent; each derives its own sub-stream so serial
  // and parallel generation agree bit-exactly.
  parallel_for(0, n, [&](int i) {
    const std::uint64_t sub = derive_stream(seed, static_cast<std::uint64_t>(i));
    Rng rng(sub);
    GbmParams p;
    p.mu = rng.next_uniform(cfg.ranges.mu.first, cfg.ranges.mu.second);
    p.sigma = rng.next_uniform(cfg.ranges.sigma.first, cfg.ranges.sigma.second);
    p.s0 = rng.next_uniform(cfg.ranges.s0.first, cfg.ranges.s0.second);
    p.dt = cfg.ranges.dt;
    const double shares = rng.next_uniform(1e6, 1e8);

    auto path = simulate_gbm(p, t - 1, rng.next_u64());
    Rng intraday(rng.next_u64());
    for (int r = 0; r < t; ++r) {
      const double close = path[r];
      const double open = (r == 0) ? close : path[r - 1];
      const double stretch = 0.5 * p.sigma * std::sqrt(p.dt);
      panel.close(r, i) = close;
      panel.open(r, i) = open;
      panel.high(r, i) =
          std::max(open, close) * (1.0 + stretch * std::abs(intraday.next_normal()));
      panel.low(r, i) =
          std::min(open, close) / (1.0 + stretch * std::abs(intraday.next_normal()));
      panel.volume(r, i) = 1e5 * std::exp(0.5 * intraday.next_normal());
      panel.market_cap(r, i) = shares * close;
    }
    panel.industry[i] = i % cfg.n_industries;
  });

  // Planted factor: per-date z-score of the realized forward return mixed
  // with noise at the requested strength. Tail dates (no forward return)
  // carry pure noise.
  const int h = cfg.signal.horizon;
  const double s = cfg.signal.strength;
  const double noise_weight = std::sqrt(std::max(0.0, 1.0 - s * s));
  FactorPanel factor;
  factor.name = "planted";
  factor.lineage = {"planted(strength=" + std::to_string(s) +
                    ",horizon=" + std::to_string(h) + ")"};
  factor.values = Matrix::Zero(t, n);
  factor.mask = Mask::Constant(t, n, true);

  Rng noise_rng(derive_stream(cfg.signal.seed ^ seed, 0x706c616e74ULL));
  Matrix noise(t, n);
  for (int r = 0; r < t; ++r)
    for (int i = 0; i < n; ++i) noise(r, i) = noise_rng.next_normal();

  for (int r = 0; r < t; ++r) {
    const bool has_forward = r + h < t;
    if (!has_forward) {
      for (int i = 0; i < n; ++i) factor.values(r, i) = noise(r, i);
      continue;
    }
    double mean = 0.0;
    Vector fwd(n);
    for (int i = 0; i < n; ++i) {
      fwd[i] = panel.close(r + h, i) / panel.close(r, i) - 1.0;
      mean += fwd[i];
    }
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) var += (fwd[i] - mean) * (fwd[i] - mean);
    var /= (n - 1);
    const double sd = std::sqrt(var);
    for (int i = 0; i < n; ++i) {
      const double z = sd > 0.0 ? (fwd[i] - mean) / sd : 0.0;
      factor.values(r, i) = s * z + noise_weight * noise(r, i);
    }
  }
  return {std::move(panel), std::move(factor)};
}

}  // namespace crossalpha
