#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace crossalpha {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using BoolRow = Eigen::Array<bool, Eigen::Dynamic, 1>;

/// Aligned time x security market data. Immutable after construction by
/// convention: everything downstream shares const references.
///
/// Missing observations are carried in an explicit mask, never as sentinel
/// values; all cross-sectional statistics downstream are computed over the
/// masked subset.
struct PricePanel {
  std::vector<std::string> dates;       // ISO-8601, strictly increasing
  std::vector<std::string> securities;  // unique ids
  Matrix open, high, low, close;        // T x N, price units
  Matrix volume;                        // T x N, shares
  Matrix market_cap;                    // T x N, currency
  Eigen::VectorXi industry;             // N, codes 0..J-1, static per security
  Mask mask;                            // T x N, true = valid observation

  int rows() const { return static_cast<int>(dates.size()); }
  int cols() const { return static_cast<int>(securities.size()); }
  /// Number of industries J = max code + 1.
  int industries() const;

  /// Checks dimension agreement, date ordering, id uniqueness and the
  /// masked-value conditions (close > 0, volume >= 0, market_cap > 0).
  /// Throws DomainError on the first violation.
  void validate() const;
};

enum class ReturnAlignment { forward, trailing };

/// Simple returns over a fixed horizon, aligned to a PricePanel.
struct ReturnPanel {
  Matrix returns;  // T x N
  Mask mask;       // valid where both endpoints were valid
  int horizon = 1;
  ReturnAlignment alignment = ReturnAlignment::forward;
};

/// Loader knobs. Column names themselves are fixed by the CSV schema.
struct LoadSpec {
  /// Securities with fewer valid days than this are dropped entirely.
  int min_history = 250;
};

/// Reads the panel CSV schema (header: date,security_id,open,high,low,close,
/// volume,market_cap,industry). Rows with non-positive close, non-positive
/// market cap, or negative volume become mask=false. Securities with fewer
/// than spec.min_history valid days are dropped.
PricePanel load_panel(const std::string& path, const LoadSpec& spec = {});

/// Writes the same schema back; numeric cells round-trip bit-exactly.
/// Rows with mask=false are emitted with close=0 so a reload masks them again.
void write_panel(const PricePanel& panel, const std::string& path);

/// Forward simple returns: returns(t,i) = close(t+h,i)/close(t,i) - 1.
/// The last `horizon` rows are fully missing.
ReturnPanel forward_returns(const PricePanel& panel, int horizon);

/// Trailing daily simple returns: returns(t,i) = close(t,i)/close(t-1,i) - 1,
/// first row missing.
ReturnPanel daily_returns(const PricePanel& panel);

/// Input mask with observations whose |daily return| exceeds the threshold
/// turned off.
Mask universe_mask(const PricePanel& panel, double max_abs_daily_return = 0.20);

/// Equal-weighted mean return of valid securities per date (NaN where no
/// security is valid).
Vector market_returns(const ReturnPanel& returns);

}  // namespace crossalpha
