#pragma once

#include <memory>
#include <string>
#include <vector>

#include "crossalpha/factor.hpp"
#include "crossalpha/panel.hpp"

namespace crossalpha {

/// Covariance accessed through matrix-vector products and quadratic forms,
/// so solvers never require the dense N x N matrix.
class CovOperator {
 public:
  virtual ~CovOperator() = default;
  virtual int dim() const = 0;
  virtual Vector apply(const Vector& w) const = 0;
  virtual double quad(const Vector& w) const {
    return w.dot(apply(w));
  }
  /// Dense materialization, available for dim() <= 1000.
  virtual Matrix dense() const = 0;
};

/// Sigma~ = B Omega B^T + diag(idio) + epsilon I.
class StructuredCov : public CovOperator {
 public:
  StructuredCov(Matrix loadings, Matrix factor_cov, Vector idio_var,
                double epsilon);
  int dim() const override { return static_cast<int>(idio_.size()); }
  Vector apply(const Vector& w) const override;
  Matrix dense() const override;

  const Matrix& loadings() const { return b_; }
  const Matrix& factor_cov() const { return omega_; }
  const Vector& idio_var() const { return idio_; }
  double epsilon() const { return eps_; }

 private:
  Matrix b_;      // N x K
  Matrix omega_;  // K x K
  Vector idio_;   // N
  double eps_;
};

class DenseCov : public CovOperator {
 public:
  explicit DenseCov(Matrix sigma) : sigma_(std::move(sigma)) {}
  int dim() const override { return static_cast<int>(sigma_.rows()); }
  Vector apply(const Vector& w) const override { return sigma_ * w; }
  Matrix dense() const override { return sigma_; }

 private:
  Matrix sigma_;
};

struct FactorReturnsResult {
  Matrix factor_returns;  // T x K; rows of zeros where the date was skipped
  Vector intercepts;      // T; the cross-sectional level term per date
  Matrix residuals;       // T x N
  Mask residual_mask;     // T x N
  BoolRow dates_used;     // T; false where too few securities
  std::vector<std::pair<int, int>> dropped;  // (date, factor) collinear drops
};

/// Per-date cross-sectional OLS of security returns on exposures that are
/// z-scored within the date. Collinear exposure columns are dropped
/// deterministically (lowest index kept) and flagged.
FactorReturnsResult factor_returns(const std::vector<FactorPanel>& factors,
                                   const ReturnPanel& returns);

/// Exponentially weighted second-moment matrix of factor returns with the
/// most recent row weighted (1-lambda); weights renormalized over available
/// history so they always sum to 1. Rows where `rows_used` is false are
/// skipped.
Matrix ewma_cov(const Matrix& factor_returns, double lambda);
Matrix ewma_cov(const Matrix& factor_returns, double lambda,
                const BoolRow& rows_used);

/// Per-security sample variance of regression residuals, floored at
/// `floor_value`; securities with fewer than 2 observations get the floor.
Vector idio_variance(const Matrix& residuals, const Mask& mask,
                     double floor_value = 1e-8);

struct RiskModel {
  Matrix loadings;    // N x K, standardized exposures
  Matrix factor_cov;  // K x K
  Vector idio_var;    // N
  double epsilon = 1e-6;
  std::vector<std::string> factor_names;
};

/// Builds the structured operator; epsilon < 0 is a config error.
std::shared_ptr<CovOperator> assemble(const RiskModel& model);
std::shared_ptr<CovOperator> assemble(const Matrix& loadings,
                                      const Matrix& factor_cov,
                                      const Vector& idio_var, double epsilon);

/// Risk model CSV bundle: loadings.csv, factor_cov.csv, idio_var.csv.
void write_risk_model(const RiskModel& model,
                      const std::vector<std::string>& securities,
                      const std::string& dir);
RiskModel read_risk_model(const std::string& dir,
                          std::vector<std::string>* securities = nullptr);

}  // namespace crossalpha
