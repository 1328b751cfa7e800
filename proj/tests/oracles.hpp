#pragma once

// Independent reference implementations used as test oracles. Everything
// here is written the straightforward way (per-cell loops, dense algebra)
// and must stay independent of the library's vectorized paths.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "crossalpha/kernels.hpp"
#include "crossalpha/optimize.hpp"
#include "crossalpha/panel.hpp"
#include "crossalpha/rng.hpp"

namespace oracle {

using crossalpha::BoolRow;
using crossalpha::Mask;
using crossalpha::Matrix;
using crossalpha::Vector;

inline std::pair<Matrix, Mask> rolling(const Matrix& x, const Mask& mask,
                                       crossalpha::KernelKind kind, int w) {
  using crossalpha::KernelKind;
  const int t_rows = static_cast<int>(x.rows());
  const int n = static_cast<int>(x.cols());
  Matrix out = Matrix::Zero(t_rows, n);
  Mask out_mask = Mask::Constant(t_rows, n, false);
  for (int t = 0; t < t_rows; ++t) {
    for (int i = 0; i < n; ++i) {
      if (t - w + 1 < 0) continue;
      std::vector<double> window;
      bool full = true;
      for (int s = t - w + 1; s <= t; ++s) {
        if (!mask(s, i)) { full = false; break; }
        window.push_back(x(s, i));
      }
      if (!full) continue;
      double v = 0.0;
      switch (kind) {
        case KernelKind::rolling_sum:
          v = std::accumulate(window.begin(), window.end(), 0.0);
          break;
        case KernelKind::rolling_mean:
          v = std::accumulate(window.begin(), window.end(), 0.0) / w;
          break;
        case KernelKind::rolling_min:
          v = *std::min_element(window.begin(), window.end());
          break;
        case KernelKind::rolling_max:
          v = *std::max_element(window.begin(), window.end());
          break;
        case KernelKind::rolling_std: {
          const double mean =
              std::accumulate(window.begin(), window.end(), 0.0) / w;
          double ss = 0.0;
          for (double u : window) ss += (u - mean) * (u - mean);
          v = std::sqrt(ss / (w - 1));
          break;
        }
        default:
          continue;
      }
      out(t, i) = v;
      out_mask(t, i) = true;
    }
  }
  return {out, out_mask};
}

inline std::pair<Matrix, Mask> lag(const Matrix& x, const Mask& mask, int w,
                                   bool delta) {
  const int t_rows = static_cast<int>(x.rows());
  const int n = static_cast<int>(x.cols());
  Matrix out = Matrix::Zero(t_rows, n);
  Mask out_mask = Mask::Constant(t_rows, n, false);
  for (int t = w; t < t_rows; ++t) {
    for (int i = 0; i < n; ++i) {
      if (delta) {
        if (mask(t, i) && mask(t - w, i)) {
          out(t, i) = x(t, i) - x(t - w, i);
          out_mask(t, i) = true;
        }
      } else if (mask(t - w, i)) {
        out(t, i) = x(t - w, i);
        out_mask(t, i) = true;
      }
    }
  }
  return {out, out_mask};
}

inline std::pair<Matrix, Mask> ewma(const Matrix& x, const Mask& mask,
                                    double alpha) {
  const int t_rows = static_cast<int>(x.rows());
  const int n = static_cast<int>(x.cols());
  Matrix out = Matrix::Zero(t_rows, n);
  Mask out_mask = Mask::Constant(t_rows, n, false);
  for (int i = 0; i < n; ++i) {
    double state = 0.0;
    bool has = false;
    for (int t = 0; t < t_rows; ++t) {
      if (!mask(t, i)) continue;
      state = has ? alpha * x(t, i) + (1.0 - alpha) * state : x(t, i);
      has = true;
      out(t, i) = state;
      out_mask(t, i) = true;
    }
  }
  return {out, out_mask};
}

inline Matrix cross_rank(const Matrix& x, const Mask& mask, bool normalized) {
  const int t_rows = static_cast<int>(x.rows());
  const int n = static_cast<int>(x.cols());
  Matrix out = Matrix::Zero(t_rows, n);
  for (int t = 0; t < t_rows; ++t) {
    std::vector<int> ids;
    for (int i = 0; i < n; ++i) {
      if (mask(t, i)) ids.push_back(i);
    }
    std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
      return x(t, a) < x(t, b);
    });
    for (std::size_t r = 0; r < ids.size(); ++r) {
      const double rank = static_cast<double>(r + 1);
      out(t, ids[r]) =
          normalized ? (rank - 0.5) / static_cast<double>(ids.size()) : rank;
    }
  }
  return out;
}

/// Random standard-normal matrix with ~drop_rate of cells masked out.
inline std::pair<Matrix, Mask> random_masked(int t_rows, int n,
                                             std::uint64_t seed,
                                             double drop_rate = 0.1) {
  crossalpha::Rng rng(seed);
  Matrix x(t_rows, n);
  Mask mask(t_rows, n);
  for (int t = 0; t < t_rows; ++t) {
    for (int i = 0; i < n; ++i) {
      x(t, i) = rng.next_normal();
      mask(t, i) = rng.next_uniform() > drop_rate;
    }
  }
  return {x, mask};
}

inline double pearson(const std::vector<double>& a,
                      const std::vector<double>& b) {
  const int n = static_cast<int>(a.size());
  double ma = 0.0, mb = 0.0;
  for (int i = 0; i < n; ++i) { ma += a[i]; mb += b[i]; }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (int i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::nan("");
  return sab / std::sqrt(saa * sbb);
}

/// Jarque-Bera statistic; chi^2(2) 0.999 quantile is 13.8155.
inline double jarque_bera(const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  const double skew = m3 / std::pow(m2, 1.5);
  const double kurt = m4 / (m2 * m2) - 3.0;
  return n / 6.0 * (skew * skew + kurt * kurt / 4.0);
}

inline double max_abs_diff(const Matrix& a, const Matrix& b, const Mask& mask) {
  double out = 0.0;
  for (int t = 0; t < a.rows(); ++t) {
    for (int i = 0; i < a.cols(); ++i) {
      if (mask(t, i)) out = std::max(out, std::abs(a(t, i) - b(t, i)));
    }
  }
  return out;
}

inline bool masks_equal(const Mask& a, const Mask& b) {
  return (a == b).all();
}

/// Exhaustive grid search for the portfolio problem over the null space of
/// the equality constraints (dimension must be <= 3). Returns the best
/// objective found.
double grid_search_objective(const crossalpha::PortfolioProblem& prob,
                             double resolution);

}  // namespace oracle
