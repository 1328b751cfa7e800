#include "crossalpha/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "crossalpha/errors.hpp"
#include "crossalpha/log.hpp"

namespace crossalpha {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// Equality constraint rows: market neutrality plus one row per sector.
/// Rows are built densely over an index subset; m stays small (J + 1, +1
/// more when a leverage equality joins during polish).
Matrix equality_rows(const Eigen::VectorXi& sectors, int n_sectors,
                     const std::vector<int>& subset) {
  const int q = static_cast<int>(subset.size());
  Matrix e = Matrix::Zero(1 + n_sectors, q);
  for (int c = 0; c < q; ++c) {
    e(0, c) = 1.0;
    e(1 + sectors[subset[c]], c) = 1.0;
  }
  return e;
}

/// Solves [M E'; E 0][x; nu] = [b; d] where M = lambda*Sigma~ + diag(rho)
/// restricted to a subset of names. The structured risk operator goes
/// through the push-through identity
///   (D + B C B')^{-1} = D^{-1} - D^{-1} B (I + C B' D^{-1} B)^{-1} C B' D^{-1}
/// so each solve costs O(qK); dense operators factorize once per rho.
class KktSolver {
 public:
  KktSolver(const CovOperator& cov, double lambda,
            const std::vector<int>& subset)
      : cov_(cov), lambda_(lambda), subset_(subset) {
    const auto* structured = dynamic_cast<const StructuredCov*>(&cov);
    if (structured != nullptr) {
      const int q = static_cast<int>(subset.size());
      b_sub_ = Matrix(q, structured->loadings().cols());
      idio_sub_ = Vector(q);
      for (int c = 0; c < q; ++c) {
        b_sub_.row(c) = structured->loadings().row(subset[c]);
        idio_sub_[c] = structured->idio_var()[subset[c]] + structured->epsilon();
      }
      omega_ = structured->factor_cov();
      structured_ = true;
    } else {
      const Matrix full = cov.dense();
      const int q = static_cast<int>(subset.size());
      dense_sub_ = Matrix(q, q);
      for (int a = 0; a < q; ++a)
        for (int b = 0; b < q; ++b)
          dense_sub_(a, b) = full(subset[a], subset[b]);
      structured_ = false;
    }
  }

  void set_equalities(Matrix e) {
    e_ = std::move(e);
    factorized_ = false;
  }

  void factorize(double rho) {
    rho_ = rho;
    const int q = static_cast<int>(subset_.size());
    if (structured_) {
      dinv_ = (lambda_ * idio_sub_.array() + rho).inverse().matrix();
      if (b_sub_.cols() > 0) {
        const Matrix g = b_sub_.transpose() * dinv_.asDiagonal() * b_sub_;
        const Matrix f = Matrix::Identity(g.rows(), g.cols()) +
                         lambda_ * omega_ * g;
        core_lu_.compute(f);
      }
    } else {
      Matrix m = lambda_ * dense_sub_;
      m.diagonal().array() += rho;
      llt_.compute(m);
      if (llt_.info() != Eigen::Success) {
        throw DomainError("portfolio solve: risk matrix factorization failed");
      }
    }
    // Schur complement of the equality block, pseudo-inverted because the
    // market row is redundant when sectors partition the universe.
    w_cols_ = Matrix(q, e_.rows());
    for (int r = 0; r < e_.rows(); ++r) {
      w_cols_.col(r) = solve_m(e_.row(r).transpose());
    }
    schur_cod_.compute(e_ * w_cols_);
    factorized_ = true;
  }

  Vector solve_m(const Vector& r) const {
    if (structured_) {
      Vector u = dinv_.cwiseProduct(r);
      if (b_sub_.cols() > 0) {
        const Vector t = b_sub_.transpose() * u;
        const Vector s = core_lu_.solve(lambda_ * (omega_ * t));
        u -= dinv_.cwiseProduct(b_sub_ * s);
      }
      return u;
    }
    return llt_.solve(r);
  }

  /// x = argmin 1/2 x'Mx - b'x s.t. Ex = d; nu are the equality duals.
  void solve(const Vector& b, const Vector& d, Vector* x, Vector* nu) const {
    const Vector t1 = solve_m(b);
    const Vector rhs = e_ * t1 - d;
    *nu = schur_cod_.solve(rhs);
    *x = t1 - w_cols_ * (*nu);
  }

  bool factorized() const { return factorized_; }
  double rho() const { return rho_; }

 private:
  const CovOperator& cov_;
  double lambda_;
  std::vector<int> subset_;
  bool structured_ = false;
  // structured pieces
  Matrix b_sub_;
  Vector idio_sub_;
  Matrix omega_;
  Vector dinv_;
  Eigen::PartialPivLU<Matrix> core_lu_;
  // dense pieces
  Matrix dense_sub_;
  Eigen::LLT<Matrix> llt_;
  // equality pieces
  Matrix e_;
  Matrix w_cols_;
  Eigen::CompleteOrthogonalDecomposition<Matrix> schur_cod_;
  double rho_ = 0.0;
  bool factorized_ = false;
};

/// argmin over [-wmax, wmax] of 1/2 (z - v)^2 + a|z - p| + b|z|.
/// The minimizer is a stationary point of one of the four sign regions or
/// one of the breakpoints {0, p, +-wmax}; all candidates are evaluated.
double coord_prox(double v, double a, double b, double p, double wmax) {
  double best_z = 0.0;
  double best_val = kInf;
  auto consider = [&](double z) {
    z = std::clamp(z, -wmax, wmax);
    const double val =
        0.5 * (z - v) * (z - v) + a * std::abs(z - p) + b * std::abs(z);
    if (val < best_val) {
      best_val = val;
      best_z = z;
    }
  };
  consider(v - a - b);
  consider(v - a + b);
  consider(v + a - b);
  consider(v + a + b);
  consider(0.0);
  consider(p);
  consider(-wmax);
  consider(wmax);
  return best_z;
}

struct ProxWork {
  Vector z;
  double tau = 0.0;
};

/// prox of h(z) = gamma sum c|z-p| + box + L1-ball, parameter 1/rho. The
/// L1 ball couples coordinates through a single multiplier tau found by
/// bisection on the gross exposure.
void prox_h(const Vector& v, const PortfolioProblem& prob, double rho,
            ProxWork* work) {
  const int n = static_cast<int>(v.size());
  work->z.resize(n);
  auto fill = [&](double tau) {
    double gross = 0.0;
    for (int i = 0; i < n; ++i) {
      const double a = prob.gamma_tc * prob.costs[i] / rho;
      work->z[i] = coord_prox(v[i], a, tau / rho, prob.prev_weights[i],
                              prob.w_max);
      gross += std::abs(work->z[i]);
    }
    return gross;
  };

  if (fill(0.0) <= prob.leverage) {
    work->tau = 0.0;
    return;
  }
  double lo = 0.0;
  double hi = rho * (v.cwiseAbs().maxCoeff() +
                     prob.gamma_tc * prob.costs.maxCoeff() + 1.0);
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (fill(mid) > prob.leverage) lo = mid;
    else hi = mid;
    if (hi - lo < 1e-16 * (1.0 + hi)) break;
  }
  work->tau = hi;
  fill(hi);  // final z from the feasible side
}

Vector apply_equalities(const Eigen::VectorXi& sectors, int n_sectors,
                        const Vector& w) {
  Vector out = Vector::Zero(1 + n_sectors);
  for (int i = 0; i < w.size(); ++i) {
    out[0] += w[i];
    out[1 + sectors[i]] += w[i];
  }
  return out;
}

Vector apply_equalities_T(const Eigen::VectorXi& sectors, const Vector& nu,
                          int n) {
  Vector out(n);
  for (int i = 0; i < n; ++i) out[i] = nu[0] + nu[1 + sectors[i]];
  return out;
}

ConstraintResiduals measure_constraints(const PortfolioProblem& prob,
                                        const Vector& w) {
  ConstraintResiduals res;
  const int n_sectors = prob.sectors.maxCoeff() + 1;
  const Vector eq = apply_equalities(prob.sectors, n_sectors, w);
  res.sum_w = std::abs(eq[0]);
  for (int j = 1; j < eq.size(); ++j) {
    res.max_sector = std::max(res.max_sector, std::abs(eq[j]));
  }
  for (int i = 0; i < w.size(); ++i) {
    res.max_position =
        std::max(res.max_position, std::abs(w[i]) - prob.w_max);
  }
  res.max_position = std::max(0.0, res.max_position);
  res.leverage_excess = std::max(0.0, w.cwiseAbs().sum() - prob.leverage);
  return res;
}

struct Interval {
  double lo, hi;
  Interval operator+(const Interval& o) const { return {lo + o.lo, hi + o.hi}; }
  double distance(double x) const {
    if (x < lo) return lo - x;
    if (x > hi) return hi - x;
    return 0.0;
  }
};

/// Subdifferential interval of gamma*c|w-p| + box normal cone + tau|w| at
/// one coordinate.
Interval dual_interval(const PortfolioProblem& prob, const Vector& w, int i,
                       double tau, double act_tol) {
  const double gc = prob.gamma_tc * prob.costs[i];
  Interval y{0.0, 0.0};
  const double dp = w[i] - prob.prev_weights[i];
  if (std::abs(dp) <= act_tol) y = y + Interval{-gc, gc};
  else y = y + Interval{gc * sign_of(dp), gc * sign_of(dp)};
  if (std::abs(w[i]) <= act_tol) y = y + Interval{-tau, tau};
  else y = y + Interval{tau * sign_of(w[i]), tau * sign_of(w[i])};
  if (w[i] >= prob.w_max - act_tol) y = y + Interval{0.0, kInf};
  else if (w[i] <= -prob.w_max + act_tol) y = y + Interval{-kInf, 0.0};
  return y;
}

KktReport kkt_from_duals(const PortfolioProblem& prob, const Vector& w,
                         const Vector& nu, double tau, double act_tol) {
  KktReport rep;
  const Vector grad = prob.lambda_risk * prob.risk->apply(w) - prob.mu_hat +
                      apply_equalities_T(prob.sectors, nu, prob.size());
  for (int i = 0; i < w.size(); ++i) {
    const Interval y = dual_interval(prob, w, i, tau, act_tol);
    rep.stationarity = std::max(rep.stationarity, y.distance(-grad[i]));
  }
  rep.primal = measure_constraints(prob, w).max();
  rep.dual = std::max(0.0, -tau);
  const double slack = prob.leverage - w.cwiseAbs().sum();
  if (slack > act_tol) rep.comp_slack = tau * slack;
  return rep;
}

/// Solution polish: fix the active set read off the ADMM iterate, solve the
/// reduced equality-constrained QP exactly, then accept only if the full
/// KKT system checks out at the requested tolerance.
struct PolishOutcome {
  bool ok = false;
  Vector w;
  Vector nu;       // market + sector duals
  double tau = 0.0;
  KktReport kkt;
};

PolishOutcome try_polish(const PortfolioProblem& prob, const Vector& z,
                         double tol, double act_tol) {
  PolishOutcome out;
  if (prob.lambda_risk <= 0.0) return out;  // reduced QP would be singular
  const int n = prob.size();
  const int n_sectors = prob.sectors.maxCoeff() + 1;
  const bool lev_active =
      prob.leverage - z.cwiseAbs().sum() <= act_tol * std::max(1.0, prob.leverage);

  std::vector<int> free_ids;
  Vector w = Vector::Zero(n);
  std::vector<bool> is_fixed(n, false);
  Vector tc_sign = Vector::Zero(n);
  for (int i = 0; i < n; ++i) {
    const double gc = prob.gamma_tc * prob.costs[i];
    if (z[i] >= prob.w_max - act_tol) {
      w[i] = prob.w_max;
      is_fixed[i] = true;
    } else if (z[i] <= -prob.w_max + act_tol) {
      w[i] = -prob.w_max;
      is_fixed[i] = true;
    } else if (gc > 0.0 && std::abs(z[i] - prob.prev_weights[i]) <= act_tol) {
      w[i] = prob.prev_weights[i];
      is_fixed[i] = true;
    } else if (lev_active && std::abs(z[i]) <= act_tol) {
      w[i] = 0.0;
      is_fixed[i] = true;
    } else {
      free_ids.push_back(i);
      tc_sign[i] = gc > 0.0 ? sign_of(z[i] - prob.prev_weights[i]) : 0.0;
    }
  }

  const int q = static_cast<int>(free_ids.size());
  const int m_rows = 1 + n_sectors + (lev_active ? 1 : 0);
  Vector nu_full = Vector::Zero(1 + n_sectors);
  double tau = 0.0;

  if (q == 0) {
    out.w = w;
  } else {
    Matrix e(m_rows, q);
    e.topRows(1 + n_sectors) = equality_rows(prob.sectors, n_sectors, free_ids);
    if (lev_active) {
      for (int c = 0; c < q; ++c) e(m_rows - 1, c) = sign_of(z[free_ids[c]]);
    }
    Vector d = Vector::Zero(m_rows);
    {
      const Vector eq_fixed = apply_equalities(prob.sectors, n_sectors, w);
      d.head(1 + n_sectors) = -eq_fixed;
      if (lev_active) {
        double fixed_gross = 0.0;
        for (int i = 0; i < n; ++i) {
          if (is_fixed[i]) fixed_gross += std::abs(w[i]);
        }
        d[m_rows - 1] = prob.leverage - fixed_gross;
      }
    }

    const Vector cross = prob.lambda_risk * prob.risk->apply(w);
    Vector b(q);
    for (int c = 0; c < q; ++c) {
      const int i = free_ids[c];
      b[c] = prob.mu_hat[i] - prob.gamma_tc * prob.costs[i] * tc_sign[i] -
             cross[i];
    }

    KktSolver solver(*prob.risk, prob.lambda_risk, free_ids);
    solver.set_equalities(e);
    try {
      solver.factorize(0.0);
    } catch (const std::exception&) {
      return out;
    }
    Vector x, nu;
    solver.solve(b, d, &x, &nu);
    if (!x.allFinite()) return out;
    for (int c = 0; c < q; ++c) w[free_ids[c]] = x[c];
    nu_full = nu.head(1 + n_sectors);
    if (lev_active) tau = nu[m_rows - 1];
  }

  if (tau < -act_tol) return out;
  tau = std::max(0.0, tau);
  out.kkt = kkt_from_duals(prob, w, nu_full, tau, act_tol);
  if (out.kkt.max() > tol) return out;
  out.ok = true;
  out.w = std::move(w);
  out.nu = std::move(nu_full);
  out.tau = tau;
  return out;
}

/// The active-set read is tolerance-sensitive near regime changes; each
/// candidate classification is validated by the exact KKT check, so trying
/// several cannot accept a wrong answer.
PolishOutcome polish_multi(const PortfolioProblem& prob, const Vector& z,
                           double tol) {
  for (const double at : {1e-7, 1e-6, 1e-5, 1e-4}) {
    PolishOutcome out = try_polish(prob, z, tol, at);
    if (out.ok) return out;
  }
  return {};
}

}  // namespace

double ConstraintResiduals::max() const {
  return std::max({sum_w, max_sector, max_position, leverage_excess});
}

double KktReport::max() const {
  return std::max({stationarity, primal, dual, comp_slack});
}

void PortfolioProblem::validate() const {
  const int n = size();
  if (n < 1) throw ConfigError("portfolio problem: empty universe");
  if (risk == nullptr || risk->dim() != n) {
    throw ConfigError("portfolio problem: risk operator dimension mismatch");
  }
  if (costs.size() != n || prev_weights.size() != n || sectors.size() != n) {
    throw ConfigError("portfolio problem: vector length mismatch");
  }
  if (lambda_risk < 0.0 || gamma_tc < 0.0) {
    throw ConfigError("portfolio problem: negative aversion parameter");
  }
  if (!(w_max > 0.0) || !(leverage > 0.0)) {
    throw ConfigError("portfolio problem: w_max and leverage must be positive");
  }
  for (int i = 0; i < n; ++i) {
    if (costs[i] < 0.0) throw ConfigError("portfolio problem: negative cost");
    if (sectors[i] < 0) throw ConfigError("portfolio problem: bad sector id");
    if (!std::isfinite(prev_weights[i])) {
      throw ConfigError("portfolio problem: prev weights must be finite");
    }
  }
  if (prev_weights.cwiseAbs().sum() > leverage + 1e-9) {
    log_warn("portfolio problem: previous weights exceed the leverage limit");
  }
}

double PortfolioProblem::objective(const Vector& w) const {
  return mu_hat.dot(w) - 0.5 * lambda_risk * risk->quad(w) -
         gamma_tc * costs.dot((w - prev_weights).cwiseAbs());
}

PortfolioSolution solve(const PortfolioProblem& problem,
                        const std::optional<PortfolioSolution>& warm_start,
                        const SolverOptions& opts) {
  problem.validate();
  if (!(opts.tol > 0.0)) throw ConfigError("solver: tol must be positive");
  const int n = problem.size();
  const int n_sectors = problem.sectors.maxCoeff() + 1;

  PortfolioSolution sol;
  sol.status = SolveStatus::max_iter;

  double rho = opts.rho0;
  Vector z = Vector::Zero(n);
  Vector u = Vector::Zero(n);
  if (warm_start.has_value() && warm_start->weights.size() == n) {
    z = warm_start->weights;
    if (warm_start->rho > 0.0 && warm_start->consensus_duals.size() == n) {
      rho = warm_start->rho;
      u = warm_start->consensus_duals / rho;
    }
    sol.warm_started = true;
  }

  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  KktSolver kkt(*problem.risk, problem.lambda_risk, all);
  kkt.set_equalities(equality_rows(problem.sectors, n_sectors, all));
  kkt.factorize(rho);

  ProxWork prox;
  Vector x(n), nu, z_old(n);
  const double polish_gate = std::max(opts.tol * 100.0, 1e-6);
  // Residual target tightens whenever polish fails at convergence, so the
  // iterate keeps approaching the optimum until classification succeeds.
  double work_tol = opts.tol;

  auto finish = [&](const Vector& w, const Vector& eq_duals, double tau,
                    bool polished, int iters, SolveStatus status) {
    sol.weights = w;
    sol.eq_duals = eq_duals;
    sol.leverage_dual = tau;
    sol.consensus_duals = rho * u;
    sol.rho = rho;
    sol.polished = polished;
    sol.status = status;
    sol.iterations = iters;
    sol.objective = problem.objective(w);
    sol.constraint_residuals = measure_constraints(problem, w);
    return sol;
  };

  int k = 0;
  bool residuals_met = false;
  for (; k < opts.max_iter; ++k) {
    const Vector b = problem.mu_hat + rho * (z - u);
    kkt.solve(b, Vector::Zero(1 + n_sectors), &x, &nu);
    const Vector xhat = opts.over_relax * x + (1.0 - opts.over_relax) * z;
    z_old = z;
    prox_h(xhat + u, problem, rho, &prox);
    z = prox.z;
    u += xhat - z;

    const double r_norm = (x - z).cwiseAbs().maxCoeff();
    const double s_norm = rho * (z - z_old).cwiseAbs().maxCoeff();
    const bool converged = r_norm <= work_tol && s_norm <= work_tol;
    residuals_met = r_norm <= opts.tol && s_norm <= opts.tol;

    if (converged || (r_norm <= polish_gate && s_norm <= polish_gate) ||
        (k + 1) % 200 == 0) {
      PolishOutcome polish = polish_multi(problem, z, opts.tol);
      if (polish.ok) {
        return finish(polish.w, polish.nu, polish.tau, true, k + 1,
                      SolveStatus::optimal);
      }
    }
    if (converged) {
      // Accept the raw iterate when the ADMM duals already certify it.
      for (const double at : {1e-7, 1e-5}) {
        const KktReport check = kkt_from_duals(problem, z, nu, prox.tau, at);
        if (check.max() <= opts.tol) {
          return finish(z, nu, prox.tau, false, k + 1, SolveStatus::optimal);
        }
      }
      work_tol = std::max(work_tol * 0.01, 1e-15);
      if (r_norm <= 1e-14 && s_norm <= 1e-14) break;  // numerically stuck
    }

    if ((k + 1) % opts.check_every == 0) {
      if (r_norm > 10.0 * s_norm && rho < 1e8) {
        rho *= 2.0;
        u /= 2.0;
        kkt.factorize(rho);
      } else if (s_norm > 10.0 * r_norm && rho > 1e-8) {
        rho /= 2.0;
        u *= 2.0;
        kkt.factorize(rho);
      }
    }
  }

  sol.message = "iteration limit reached";
  const SolveStatus status =
      residuals_met && measure_constraints(problem, z).max() <= opts.tol
          ? SolveStatus::optimal
          : SolveStatus::max_iter;
  return finish(z, nu, prox.tau, false, k, status);
}

KktReport verify_kkt(const PortfolioProblem& problem, const Vector& weights,
                     const PortfolioSolution* solution, double active_tol) {
  problem.validate();
  const int n = problem.size();
  const int n_sectors = problem.sectors.maxCoeff() + 1;
  if (solution != nullptr && solution->eq_duals.size() == 1 + n_sectors) {
    return kkt_from_duals(problem, weights, solution->eq_duals,
                          solution->leverage_dual, active_tol);
  }

  // No multipliers supplied: estimate (nu, tau) by alternating between the
  // interval projection of the subgradient and least squares on the
  // remaining smooth residual.
  const Vector base = problem.lambda_risk * problem.risk->apply(weights) -
                      problem.mu_hat;
  const bool lev_active =
      problem.leverage - weights.cwiseAbs().sum() <=
      active_tol * std::max(1.0, problem.leverage);
  const int m = 1 + n_sectors + (lev_active ? 1 : 0);
  Matrix c(n, m);
  for (int i = 0; i < n; ++i) {
    c(i, 0) = 1.0;
    for (int j = 0; j < n_sectors; ++j) c(i, 1 + j) = 0.0;
    c(i, 1 + problem.sectors[i]) = 1.0;
    if (lev_active) c(i, m - 1) = sign_of(weights[i]);
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(c);

  Vector theta = Vector::Zero(m);
  Vector y(n);
  for (int iter = 0; iter < 200; ++iter) {
    const Vector drive = base + c * theta;
    for (int i = 0; i < n; ++i) {
      Interval iv = dual_interval(problem, weights, i, 0.0, active_tol);
      // tau handled through theta; here the interval carries only the
      // transaction-cost and box parts.
      const double target = -drive[i];
      y[i] = std::clamp(target, iv.lo, iv.hi);
    }
    theta = cod.solve(-(base + y));
    if (lev_active && theta[m - 1] < 0.0) theta[m - 1] = 0.0;
  }

  Vector nu = theta.head(1 + n_sectors);
  const double tau = lev_active ? theta[m - 1] : 0.0;
  return kkt_from_duals(problem, weights, nu, tau, active_tol);
}

std::vector<PortfolioSolution> rebalance_sequence(
    const std::vector<PortfolioProblem>& problems, WarmStartPolicy policy,
    const SolverOptions& opts) {
  std::vector<PortfolioSolution> out;
  out.reserve(problems.size());
  for (std::size_t t = 0; t < problems.size(); ++t) {
    std::optional<PortfolioSolution> warm;
    if (policy == WarmStartPolicy::previous && t > 0 &&
        out.back().weights.size() == problems[t].mu_hat.size()) {
      warm = out.back();
    }
    out.push_back(solve(problems[t], warm, opts));
  }
  return out;
}

}  // namespace crossalpha
