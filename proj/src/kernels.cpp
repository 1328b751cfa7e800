#include "crossalpha/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <vector>

#include "crossalpha/errors.hpp"

namespace crossalpha {

namespace {

using ArrayXd = Eigen::ArrayXd;
using ArrayXi = Eigen::ArrayXi;

/// Fixed-capacity row ring shared by the windowed kernels. Values at
/// invalid cells are stored as 0 so accumulators never see garbage.
class RowRing {
 public:
  RowRing(int window, int n_cols)
      : window_(window),
        values_(Matrix::Zero(window, n_cols)),
        valid_(Mask::Constant(window, n_cols, false)) {}

  int slot(long tick) const { return static_cast<int>(tick % window_); }

  void store(long tick, const Vector& clean_values, const BoolRow& valid) {
    const int s = slot(tick);
    values_.row(s) = clean_values.transpose();
    valid_.row(s) = valid.transpose();
  }

  const Matrix& values() const { return values_; }
  const Mask& valid() const { return valid_; }

 private:
  int window_;
  Matrix values_;
  Mask valid_;
};

class RollingSumState : public KernelState {
 public:
  RollingSumState(int window, int n_cols, bool mean)
      : window_(window),
        mean_(mean),
        ring_(window, n_cols),
        sum_(ArrayXd::Zero(n_cols)),
        count_(ArrayXi::Zero(n_cols)) {}

  void step(Eigen::Ref<Vector> values, BoolRow& valid) override {
    const ArrayXd clean = valid.select(values.array(), 0.0);
    if (tick_ >= window_) {
      const int s = ring_.slot(tick_);
      sum_ -= ring_.values().row(s).transpose().array();
      count_ -= ring_.valid().row(s).transpose().cast<int>();
    }
    ring_.store(tick_, clean.matrix(), valid);
    sum_ += clean;
    count_ += valid.cast<int>();
    ++tick_;

    BoolRow full = (count_ == window_);
    ArrayXd out = mean_ ? ArrayXd(sum_ / window_) : sum_;
    values = full.select(out, 0.0).matrix();
    valid = full;
  }

  int cache_rows() const override { return window_; }

 private:
  int window_;
  bool mean_;
  long tick_ = 0;
  RowRing ring_;
  ArrayXd sum_;
  ArrayXi count_;
};

/// Two-pass rolling standard deviation: window mean from the running sum,
/// squared deviations re-read from the buffered rows. Sample (w-1)
/// denominator.
class RollingStdState : public KernelState {
 public:
  RollingStdState(int window, int n_cols)
      : window_(window),
        ring_(window, n_cols),
        sum_(ArrayXd::Zero(n_cols)),
        count_(ArrayXi::Zero(n_cols)),
        ssq_(n_cols) {}

  void step(Eigen::Ref<Vector> values, BoolRow& valid) override {
    const ArrayXd clean = valid.select(values.array(), 0.0);
    if (tick_ >= window_) {
      const int s = ring_.slot(tick_);
      sum_ -= ring_.values().row(s).transpose().array();
      count_ -= ring_.valid().row(s).transpose().cast<int>();
    }
    ring_.store(tick_, clean.matrix(), valid);
    sum_ += clean;
    count_ += valid.cast<int>();
    ++tick_;

    BoolRow full = (count_ == window_);
    const ArrayXd mean = sum_ / window_;
    ssq_.setZero();
    for (int k = 0; k < window_; ++k) {
      const ArrayXd dev =
          ring_.values().row(k).transpose().array() - mean;
      ssq_ += ring_.valid().row(k).transpose().select(dev * dev, 0.0);
    }
    const ArrayXd out = (ssq_ / (window_ - 1)).sqrt();
    values = full.select(out, 0.0).matrix();
    valid = full;
  }

  int cache_rows() const override { return window_; }

 private:
  int window_;
  long tick_ = 0;
  RowRing ring_;
  ArrayXd sum_;
  ArrayXi count_;
  ArrayXd ssq_;
};

/// Sliding-window extremum via per-column monotonic deques; comparisons
/// only, so results are exact and independent of chunking.
class RollingExtremumState : public KernelState {
 public:
  RollingExtremumState(int window, int n_cols, bool is_max)
      : window_(window),
        is_max_(is_max),
        valid_ring_(Mask::Constant(window, n_cols, false)),
        count_(ArrayXi::Zero(n_cols)),
        deques_(n_cols) {}

  void step(Eigen::Ref<Vector> values, BoolRow& valid) override {
    const int n = static_cast<int>(values.size());
    const int s = static_cast<int>(tick_ % window_);
    if (tick_ >= window_) {
      count_ -= valid_ring_.row(s).transpose().cast<int>();
    }
    valid_ring_.row(s) = valid.transpose();
    count_ += valid.cast<int>();

    for (int i = 0; i < n; ++i) {
      auto& dq = deques_[i];
      while (!dq.empty() && dq.front().first <= tick_ - window_) dq.pop_front();
      if (valid[i]) {
        const double v = values[i];
        if (is_max_) {
          while (!dq.empty() && dq.back().second <= v) dq.pop_back();
        } else {
          while (!dq.empty() && dq.back().second >= v) dq.pop_back();
        }
        dq.emplace_back(tick_, v);
      }
      const bool full = count_[i] == window_;
      values[i] = full ? dq.front().second : 0.0;
      valid[i] = full;
    }
    ++tick_;
  }

  int cache_rows() const override { return window_; }

 private:
  int window_;
  bool is_max_;
  long tick_ = 0;
  Mask valid_ring_;
  ArrayXi count_;
  std::vector<std::deque<std::pair<long, double>>> deques_;
};

class LagState : public KernelState {
 public:
  LagState(int window, int n_cols, bool delta)
      : window_(window), delta_(delta), ring_(window, n_cols) {}

  void step(Eigen::Ref<Vector> values, BoolRow& valid) override {
    const ArrayXd clean = valid.select(values.array(), 0.0);
    Vector lagged = Vector::Zero(values.size());
    BoolRow lagged_valid = BoolRow::Constant(values.size(), false);
    if (tick_ >= window_) {
      const int s = ring_.slot(tick_);
      lagged = ring_.values().row(s).transpose();
      lagged_valid = ring_.valid().row(s).transpose();
    }
    ring_.store(tick_, clean.matrix(), valid);
    ++tick_;

    if (delta_) {
      BoolRow both = valid && lagged_valid;
      values = both.select(clean - lagged.array(), 0.0).matrix();
      valid = both;
    } else {
      values = lagged;
      valid = lagged_valid;
    }
  }

  int cache_rows() const override { return window_; }

 private:
  int window_;
  bool delta_;
  long tick_ = 0;
  RowRing ring_;
};

class EwmaState : public KernelState {
 public:
  EwmaState(double alpha, int n_cols)
      : alpha_(alpha),
        state_(ArrayXd::Zero(n_cols)),
        has_(BoolRow::Constant(n_cols, false)) {}

  void step(Eigen::Ref<Vector> values, BoolRow& valid) override {
    const ArrayXd x = valid.select(values.array(), 0.0);
    const BoolRow update = valid && has_;
    const BoolRow start = valid && !has_;
    state_ = update.select(alpha_ * x + (1.0 - alpha_) * state_, state_);
    state_ = start.select(x, state_);
    has_ = has_ || valid;
    values = valid.select(state_, 0.0).matrix();
  }

  int cache_rows() const override { return 1; }

 private:
  double alpha_;
  ArrayXd state_;
  BoolRow has_;
};

class CrossRankState : public KernelState {
 public:
  CrossRankState(bool normalized, int n_cols) : normalized_(normalized) {
    order_.reserve(n_cols);
  }

  void step(Eigen::Ref<Vector> values, BoolRow& valid) override {
    order_.clear();
    for (int i = 0; i < values.size(); ++i) {
      if (valid[i]) order_.push_back(i);
    }
    std::stable_sort(order_.begin(), order_.end(),
                     [&](int a, int b) { return values[a] < values[b]; });
    const double n_valid = static_cast<double>(order_.size());
    for (std::size_t r = 0; r < order_.size(); ++r) {
      const double rank = static_cast<double>(r + 1);
      values[order_[r]] = normalized_ ? (rank - 0.5) / n_valid : rank;
    }
    for (int i = 0; i < values.size(); ++i) {
      if (!valid[i]) values[i] = 0.0;
    }
  }

  int cache_rows() const override { return 0; }

 private:
  bool normalized_;
  std::vector<int> order_;
};

}  // namespace

bool is_rolling(KernelKind kind) {
  switch (kind) {
    case KernelKind::rolling_mean:
    case KernelKind::rolling_std:
    case KernelKind::rolling_min:
    case KernelKind::rolling_max:
    case KernelKind::rolling_sum:
      return true;
    default:
      return false;
  }
}

std::string kernel_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::rolling_mean: return "rolling_mean";
    case KernelKind::rolling_std: return "rolling_std";
    case KernelKind::rolling_min: return "rolling_min";
    case KernelKind::rolling_max: return "rolling_max";
    case KernelKind::rolling_sum: return "rolling_sum";
    case KernelKind::cross_rank: return "cross_rank";
    case KernelKind::ewma: return "ewma";
    case KernelKind::lag: return "lag";
    case KernelKind::delta: return "delta";
  }
  return "?";
}

void KernelSpec::validate() const {
  if (kind == KernelKind::ewma) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
      throw ConfigError("ewma alpha must be in (0, 1]");
    }
    return;
  }
  if (kind == KernelKind::cross_rank) return;
  if (window < 1) throw ConfigError(kernel_name(kind) + ": window must be >= 1");
  if (kind == KernelKind::rolling_std && window < 2) {
    throw ConfigError("rolling_std: window must be >= 2");
  }
}

std::unique_ptr<KernelState> KernelState::make(const KernelSpec& spec,
                                               int n_cols) {
  spec.validate();
  switch (spec.kind) {
    case KernelKind::rolling_mean:
      return std::make_unique<RollingSumState>(spec.window, n_cols, true);
    case KernelKind::rolling_sum:
      return std::make_unique<RollingSumState>(spec.window, n_cols, false);
    case KernelKind::rolling_std:
      return std::make_unique<RollingStdState>(spec.window, n_cols);
    case KernelKind::rolling_min:
      return std::make_unique<RollingExtremumState>(spec.window, n_cols, false);
    case KernelKind::rolling_max:
      return std::make_unique<RollingExtremumState>(spec.window, n_cols, true);
    case KernelKind::ewma:
      return std::make_unique<EwmaState>(spec.alpha, n_cols);
    case KernelKind::lag:
      return std::make_unique<LagState>(spec.window, n_cols, false);
    case KernelKind::delta:
      return std::make_unique<LagState>(spec.window, n_cols, true);
    case KernelKind::cross_rank:
      return std::make_unique<CrossRankState>(spec.normalized, n_cols);
  }
  throw ConfigError("unknown kernel kind");
}

namespace {

std::pair<Matrix, Mask> run_state(const Matrix& x, const Mask& mask,
                                  KernelState& state) {
  const int t = static_cast<int>(x.rows());
  const int n = static_cast<int>(x.cols());
  Matrix out_values(t, n);
  Mask out_mask(t, n);
  Vector row(n);
  BoolRow valid(n);
  for (int r = 0; r < t; ++r) {
    row = x.row(r).transpose();
    valid = mask.row(r).transpose();
    state.step(row, valid);
    out_values.row(r) = row.transpose();
    out_mask.row(r) = valid.transpose();
  }
  return {std::move(out_values), std::move(out_mask)};
}

}  // namespace

std::pair<Matrix, Mask> rolling_apply(const Matrix& x, const Mask& mask,
                                      const KernelSpec& spec) {
  if (!is_rolling(spec.kind)) {
    throw ConfigError("rolling_apply requires a rolling kernel kind");
  }
  if (spec.window > x.rows()) {
    throw ConfigError("invalid window " + std::to_string(spec.window) +
                      " for " + std::to_string(x.rows()) + " rows");
  }
  auto state = KernelState::make(spec, static_cast<int>(x.cols()));
  return run_state(x, mask, *state);
}

std::pair<Matrix, Mask> cross_rank(const Matrix& x, const Mask& mask,
                                   bool normalized) {
  KernelSpec spec{KernelKind::cross_rank};
  spec.normalized = normalized;
  auto state = KernelState::make(spec, static_cast<int>(x.cols()));
  return run_state(x, mask, *state);
}

std::pair<Matrix, Mask> ewma(const Matrix& x, const Mask& mask, double alpha) {
  KernelSpec spec{KernelKind::ewma};
  spec.alpha = alpha;
  auto state = KernelState::make(spec, static_cast<int>(x.cols()));
  return run_state(x, mask, *state);
}

std::pair<Matrix, Mask> apply_kernel(const Matrix& x, const Mask& mask,
                                     const KernelSpec& spec) {
  if (is_rolling(spec.kind)) return rolling_apply(x, mask, spec);
  auto state = KernelState::make(spec, static_cast<int>(x.cols()));
  return run_state(x, mask, *state);
}

FactorPanel alpha_momentum_volume(const PricePanel& panel, int d) {
  const int t = panel.rows();
  const int n = panel.cols();
  if (d < 1 || d >= t) throw ConfigError("alpha_momentum_volume: bad d");

  Matrix ret = Matrix::Zero(t, n);
  Mask ret_mask = Mask::Constant(t, n, false);
  for (int r = d; r < t; ++r) {
    for (int i = 0; i < n; ++i) {
      if (panel.mask(r, i) && panel.mask(r - d, i)) {
        ret(r, i) = (panel.close(r, i) - panel.close(r - d, i)) /
                    panel.close(r - d, i);
        ret_mask(r, i) = true;
      }
    }
  }
  auto [ret_rank, ret_rank_mask] = cross_rank(ret, ret_mask);
  auto [vol_rank, vol_rank_mask] = cross_rank(panel.volume, panel.mask);

  FactorPanel out;
  out.name = "alpha_momentum_volume_" + std::to_string(d);
  out.lineage = {"delta_return(close," + std::to_string(d) + ")", "cross_rank",
                 "cross_rank(volume)", "multiply"};
  out.mask = ret_rank_mask && vol_rank_mask;
  out.values = out.mask.select(ret_rank.array() * vol_rank.array(), 0.0);
  return out;
}

FactorPanel rolling_beta(const PricePanel& panel, const Vector& market, int w) {
  if (w < 2) throw ConfigError("rolling_beta: window must be >= 2");
  const int t = panel.rows();
  const int n = panel.cols();
  ReturnPanel daily = daily_returns(panel);
  Vector mkt = market.size() > 0 ? market : market_returns(daily);
  if (mkt.size() != t) throw ConfigError("rolling_beta: market vector length");

  FactorPanel out;
  out.name = "rolling_beta_" + std::to_string(w);
  out.lineage = {"daily_returns", "rolling_beta(w=" + std::to_string(w) + ")"};
  out.values = Matrix::Zero(t, n);
  out.mask = Mask::Constant(t, n, false);

  ArrayXd sx = ArrayXd::Zero(n), sy = ArrayXd::Zero(n);
  ArrayXd sxy = ArrayXd::Zero(n), syy = ArrayXd::Zero(n);
  ArrayXi count = ArrayXi::Zero(n);
  Matrix ring_x = Matrix::Zero(w, n);
  Matrix ring_y = Matrix::Zero(w, n);
  Mask ring_valid = Mask::Constant(w, n, false);

  long tick = 0;
  for (int r = 1; r < t; ++r, ++tick) {
    const int slot = static_cast<int>(tick % w);
    if (tick >= w) {
      const auto ov = ring_valid.row(slot).transpose();
      const ArrayXd ox = ring_x.row(slot).transpose().array();
      const ArrayXd oy = ring_y.row(slot).transpose().array();
      sx -= ox;
      sy -= oy;
      sxy -= ox * oy;
      syy -= oy * oy;
      count -= ov.cast<int>();
    }
    const double m = mkt[r];
    BoolRow valid = daily.mask.row(r).transpose() && BoolRow::Constant(n, std::isfinite(m));
    const ArrayXd x = valid.select(daily.returns.row(r).transpose().array(), 0.0);
    const ArrayXd y = valid.select(ArrayXd::Constant(n, m), 0.0);
    ring_x.row(slot) = x.matrix().transpose();
    ring_y.row(slot) = y.matrix().transpose();
    ring_valid.row(slot) = valid.transpose();
    sx += x;
    sy += y;
    sxy += x * y;
    syy += y * y;
    count += valid.cast<int>();

    for (int i = 0; i < n; ++i) {
      if (count[i] != w) continue;
      const double cov = (sxy[i] - sx[i] * sy[i] / w) / (w - 1);
      const double var = (syy[i] - sy[i] * sy[i] / w) / (w - 1);
      if (var > 0.0) {
        const double beta = cov / var;
        if (std::isfinite(beta)) {
          out.values(r, i) = beta;
          out.mask(r, i) = true;
        }
      }
    }
  }
  return out;
}

}  // namespace crossalpha
