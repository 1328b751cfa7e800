#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crossalpha/panel.hpp"
#include "crossalpha/risk.hpp"

namespace crossalpha {

/// Maximize  w' mu - (lambda/2) w' Sigma w - gamma * sum_i c_i |w_i - p_i|
/// subject to market neutrality, per-sector neutrality, |w_i| <= w_max and
/// ||w||_1 <= leverage.
struct PortfolioProblem {
  Vector mu_hat;
  std::shared_ptr<const CovOperator> risk;
  double lambda_risk = 1.0;
  double gamma_tc = 0.0;
  Vector costs;         // per-name cost rate, >= 0
  Vector prev_weights;  // w_{t-1}
  double w_max = 0.02;
  double leverage = 2.0;
  Eigen::VectorXi sectors;  // sector id per name, 0..J-1

  int size() const { return static_cast<int>(mu_hat.size()); }
  void validate() const;
  double objective(const Vector& w) const;
};

enum class SolveStatus { optimal, max_iter, infeasible };

struct ConstraintResiduals {
  double sum_w = 0.0;            // |1' w|
  double max_sector = 0.0;       // max_j |sum_{i in S_j} w_i|
  double max_position = 0.0;     // max_i (|w_i| - w_max)_+
  double leverage_excess = 0.0;  // (||w||_1 - L)_+

  double max() const;
};

struct PortfolioSolution {
  Vector weights;
  double objective = 0.0;
  ConstraintResiduals constraint_residuals;
  int iterations = 0;
  bool warm_started = false;
  bool polished = false;
  SolveStatus status = SolveStatus::max_iter;
  std::string message;

  // Dual information for warm starts and KKT verification.
  Vector eq_duals;      // one per constraint row (market + sectors)
  Vector consensus_duals;  // scaled ADMM duals (y = rho * u)
  double leverage_dual = 0.0;  // tau >= 0
  double rho = 0.0;
};

struct SolverOptions {
  double tol = 1e-8;
  int max_iter = 50000;
  double rho0 = 1.0;
  double over_relax = 1.6;
  int check_every = 25;
};

PortfolioSolution solve(const PortfolioProblem& problem,
                        const std::optional<PortfolioSolution>& warm_start = {},
                        const SolverOptions& opts = {});

/// Max violation per KKT condition. Multipliers come from the solution when
/// available; otherwise they are estimated by alternating projection, so the
/// report is meaningful for externally supplied weight vectors too.
struct KktReport {
  double stationarity = 0.0;   // distance of the gradient to the subdifferential
  double primal = 0.0;         // constraint violations
  double dual = 0.0;           // multiplier sign violations
  double comp_slack = 0.0;     // leverage complementarity
  double max() const;
};

KktReport verify_kkt(const PortfolioProblem& problem, const Vector& weights,
                     const PortfolioSolution* solution = nullptr,
                     double active_tol = 1e-7);

enum class WarmStartPolicy { none, previous };

std::vector<PortfolioSolution> rebalance_sequence(
    const std::vector<PortfolioProblem>& problems, WarmStartPolicy policy,
    const SolverOptions& opts = {});

}  // namespace crossalpha
