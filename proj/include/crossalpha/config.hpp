#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "crossalpha/backtest.hpp"
#include "crossalpha/evaluate.hpp"
#include "crossalpha/neutralize.hpp"
#include "crossalpha/synth.hpp"

namespace crossalpha {

/// Full run configuration. Every key has a default; the CLI layers a config
/// file and flags on top. Parse-validate-then-run: an invalid document never
/// starts a partial run.
struct RunConfig {
  SynthMarketConfig synth;
  std::vector<std::pair<std::string, std::string>> factor_defs;  // name, expr
  NeutralizationConfig neutralize;

  int eval_horizon = 1;
  CorrMethod eval_method = CorrMethod::spearman;
  QualityThresholds quality;

  BacktestConfig backtest;

  // standalone `optimize` subcommand
  double opt_lambda_risk = 8.0;
  double opt_gamma_tc = 1.0;
  double opt_cost = 0.0015;
  double opt_w_max = 0.02;
  double opt_leverage = 2.0;
  double opt_tol = 1e-8;
  int opt_max_iter = 50000;

  int min_history = 250;  // panel loader
};

/// INI-style document: [section] headers, key = value lines, '#' comments.
/// Unknown sections or keys are rejected; [factors] holds name = expression
/// pairs and accepts any key.
RunConfig load_config(const std::string& path);
void apply_config_text(const std::string& text, RunConfig* cfg);

/// Canonical serialization (every key, sorted within fixed section order).
std::string dump_config(const RunConfig& cfg);

/// FNV-1a hash of the canonical dump, for run manifests.
std::uint64_t config_hash(const RunConfig& cfg);

/// One line per key: section.key, default, description.
std::string describe_config_keys();

}  // namespace crossalpha
