#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "crossalpha/factor.hpp"
#include "crossalpha/panel.hpp"

namespace crossalpha {

/// Geometric Brownian motion parameters. Units: mu per year, sigma per
/// sqrt(year), dt in years.
struct GbmParams {
  double mu = 0.0;
  double sigma = 0.0;
  double dt = 1.0 / 252.0;
  double s0 = 100.0;
};

/// Ground-truth signal planted into a synthetic market.
struct PlantedSignalSpec {
  double strength = 0.0;  // target cross-sectional correlation, in [0, 1]
  int horizon = 20;       // days
  std::uint64_t seed = 0;
};

/// Per-security parameter draws for generate_market.
struct GbmParamRanges {
  std::pair<double, double> mu{0.0, 0.10};
  std::pair<double, double> sigma{0.15, 0.35};
  std::pair<double, double> s0{20.0, 200.0};
  double dt = 1.0 / 252.0;
};

struct SynthMarketConfig {
  int n_securities = 100;
  int n_days = 500;
  GbmParamRanges ranges;
  PlantedSignalSpec signal;
  int n_industries = 5;  // assigned round-robin
};

/// Euler-Maruyama path of length steps+1:
///   S_{t+dt} = S_t * exp[(mu - sigma^2/2) dt + sigma sqrt(dt) Z_t].
/// Identical seed gives a bit-identical path.
std::vector<double> simulate_gbm(const GbmParams& params, int steps,
                                 std::uint64_t seed);

/// Maximum-likelihood fit from a price path: with m and v the mean and
/// sample variance of log returns, sigma^2 = v/dt and mu = m/dt + sigma^2/2.
GbmParams estimate_gbm(const std::vector<double>& path, double dt);

/// Simulates an independent GBM cross-section and plants a factor
///   f = strength * z(forward return) + sqrt(1 - strength^2) * noise,
/// z-scored per date. Dates whose forward return is undefined carry pure
/// noise. Security i uses the sub-stream derive_stream(seed, i), so parallel
/// and serial generation agree bit-exactly.
std::pair<PricePanel, FactorPanel> generate_market(const SynthMarketConfig& cfg,
                                                   std::uint64_t seed);

}  // namespace crossalpha
