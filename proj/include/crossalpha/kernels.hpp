#pragma once

#include <memory>
#include <string>
#include <utility>

#include "crossalpha/factor.hpp"
#include "crossalpha/panel.hpp"

namespace crossalpha {

enum class KernelKind {
  rolling_mean,
  rolling_std,
  rolling_min,
  rolling_max,
  rolling_sum,
  cross_rank,
  ewma,
  lag,
  delta,
};

bool is_rolling(KernelKind kind);
std::string kernel_name(KernelKind kind);

struct KernelSpec {
  KernelKind kind;
  int window = 1;           // rolling / lag / delta
  double alpha = 1.0;       // ewma smoothing, in (0, 1]
  bool normalized = false;  // cross_rank: map ranks to (rank - 0.5) / n

  void validate() const;  // throws ConfigError
};

/// Streaming kernel evaluator: consumes one cross-sectional row per step and
/// emits the corresponding output row in place. All kernels are driven this
/// way, so evaluating a panel in chunks of any size is bit-identical to a
/// single pass — the carried state plays the role of a trailing-row cache.
///
/// Row updates are whole-vector operations across all N columns; no kernel
/// rescans its window per cell.
class KernelState {
 public:
  virtual ~KernelState() = default;
  virtual void step(Eigen::Ref<Vector> values, BoolRow& valid) = 0;

  /// Trailing input rows a cold restart would need (the per-chunk cache
  /// size). ewma reports 1: its state is a running recursion, not a window.
  virtual int cache_rows() const = 0;

  static std::unique_ptr<KernelState> make(const KernelSpec& spec, int n_cols);
};

/// Applies a rolling kernel over the full matrix. Output cells are masked
/// unless the window holds `window` valid observations. rolling_std uses the
/// two-pass mean-subtracted formula with the (w-1) denominator and needs
/// window >= 2.
std::pair<Matrix, Mask> rolling_apply(const Matrix& x, const Mask& mask,
                                      const KernelSpec& spec);

/// Per-date ranks 1..n_valid ascending by value, ties broken by ascending
/// column index. Masked cells stay masked (values 0). `normalized` maps
/// rank r of n to (r - 0.5)/n.
std::pair<Matrix, Mask> cross_rank(const Matrix& x, const Mask& mask,
                                   bool normalized = false);

/// EWMA_t = alpha*x_t + (1-alpha)*EWMA_{t-1}, initialized at the first valid
/// observation per column; masked gaps carry the state forward unchanged.
std::pair<Matrix, Mask> ewma(const Matrix& x, const Mask& mask, double alpha);

std::pair<Matrix, Mask> apply_kernel(const Matrix& x, const Mask& mask,
                                     const KernelSpec& spec);

/// rank(d-day close return) * rank(volume), ranks per date.
FactorPanel alpha_momentum_volume(const PricePanel& panel, int d);

/// Rolling regression slope of each security's daily returns on the market
/// return over a w-day window. `market` may be empty, in which case the
/// equal-weighted mean return of valid securities is used. Windows with any
/// missing security return, insufficient history, or zero market variance
/// are masked.
FactorPanel rolling_beta(const PricePanel& panel, const Vector& market, int w);

}  // namespace crossalpha
