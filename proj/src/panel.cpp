#include "crossalpha/panel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "crossalpha/csv.hpp"
#include "crossalpha/errors.hpp"
#include "crossalpha/log.hpp"

namespace crossalpha {

int PricePanel::industries() const {
  if (industry.size() == 0) return 0;
  return industry.maxCoeff() + 1;
}

void PricePanel::validate() const {
  const int t = rows();
  const int n = cols();
  auto check_dims = [&](const Matrix& m, const char* name) {
    if (m.rows() != t || m.cols() != n) {
      throw DomainError(std::string("panel matrix '") + name +
                        "' has mismatched dimensions");
    }
  };
  check_dims(open, "open");
  check_dims(high, "high");
  check_dims(low, "low");
  check_dims(close, "close");
  check_dims(volume, "volume");
  check_dims(market_cap, "market_cap");
  if (mask.rows() != t || mask.cols() != n) {
    throw DomainError("panel mask has mismatched dimensions");
  }
  if (industry.size() != n) {
    throw DomainError("industry vector length does not match security count");
  }
  for (int i = 1; i < t; ++i) {
    if (!(dates[i - 1] < dates[i])) {
      throw DomainError("dates are not strictly increasing at row " +
                        std::to_string(i));
    }
  }
  std::set<std::string> seen(securities.begin(), securities.end());
  if (static_cast<int>(seen.size()) != n) {
    throw DomainError("duplicate security ids");
  }
  for (int i = 0; i < n; ++i) {
    if (industry[i] < 0) {
      throw DomainError("negative industry code for " + securities[i]);
    }
  }
  for (int r = 0; r < t; ++r) {
    for (int i = 0; i < n; ++i) {
      if (!mask(r, i)) continue;
      if (!(close(r, i) > 0.0)) {
        throw DomainError("non-positive close at valid cell (" +
                          dates[r] + ", " + securities[i] + ")");
      }
      if (!(volume(r, i) >= 0.0)) {
        throw DomainError("negative volume at valid cell (" + dates[r] +
                          ", " + securities[i] + ")");
      }
      if (!(market_cap(r, i) > 0.0)) {
        throw DomainError("non-positive market cap at valid cell (" +
                          dates[r] + ", " + securities[i] + ")");
      }
    }
  }
}

PricePanel load_panel(const std::string& path, const LoadSpec& spec) {
  CsvTable table = read_csv(path);

  static const char* kRequired[] = {"date",   "security_id", "open",
                                    "high",   "low",         "close",
                                    "volume", "market_cap",  "industry"};
  std::map<std::string, int> cols;
  for (const char* name : kRequired) {
    int idx = table.column(name);
    if (idx < 0) {
      throw ParseError(path + ": missing required column '" +
                       std::string(name) + "'");
    }
    cols[name] = idx;
  }
  for (const auto& name : table.header) {
    if (cols.find(name) == cols.end()) {
      log_warn(path + ": ignoring unknown column '" + name + "'");
    }
  }

  std::vector<std::string> dates;
  std::vector<std::string> securities;
  std::map<std::string, int> date_index;
  std::map<std::string, int> sec_index;
  for (const auto& row : table.rows) {
    const std::string& d = row[cols["date"]];
    const std::string& s = row[cols["security_id"]];
    if (date_index.emplace(d, 0).second) dates.push_back(d);
    if (sec_index.emplace(s, 0).second) securities.push_back(s);
  }
  std::sort(dates.begin(), dates.end());
  std::sort(securities.begin(), securities.end());
  for (std::size_t i = 0; i < dates.size(); ++i) date_index[dates[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < securities.size(); ++i) sec_index[securities[i]] = static_cast<int>(i);

  const int t = static_cast<int>(dates.size());
  const int n = static_cast<int>(securities.size());
  PricePanel panel;
  panel.dates = dates;
  panel.securities = securities;
  panel.open = Matrix::Zero(t, n);
  panel.high = Matrix::Zero(t, n);
  panel.low = Matrix::Zero(t, n);
  panel.close = Matrix::Zero(t, n);
  panel.volume = Matrix::Zero(t, n);
  panel.market_cap = Matrix::Zero(t, n);
  panel.industry = Eigen::VectorXi::Constant(n, -1);
  panel.mask = Mask::Constant(t, n, false);

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const int line = table.line_numbers[r];
    const int ti = date_index[row[cols["date"]]];
    const int si = sec_index[row[cols["security_id"]]];
    bool fields_present = true;
    for (const char* name : {"open", "high", "low", "close", "volume",
                             "market_cap", "industry"}) {
      if (row[cols[name]].empty()) fields_present = false;
    }
    if (!fields_present) continue;  // missing required fields -> mask stays false
    const double open_v = parse_double(row[cols["open"]], line);
    const double high_v = parse_double(row[cols["high"]], line);
    const double low_v = parse_double(row[cols["low"]], line);
    const double close_v = parse_double(row[cols["close"]], line);
    const double volume_v = parse_double(row[cols["volume"]], line);
    const double mcap_v = parse_double(row[cols["market_cap"]], line);
    const long industry_v = parse_long(row[cols["industry"]], line);
    if (industry_v < 0) {
      throw ParseError("line " + std::to_string(line) +
                       ": negative industry code");
    }
    if (panel.industry[si] >= 0 &&
        panel.industry[si] != static_cast<int>(industry_v)) {
      throw ParseError("line " + std::to_string(line) +
                       ": conflicting industry code for " +
                       row[cols["security_id"]]);
    }
    panel.industry[si] = static_cast<int>(industry_v);
    panel.open(ti, si) = open_v;
    panel.high(ti, si) = high_v;
    panel.low(ti, si) = low_v;
    panel.close(ti, si) = close_v;
    panel.volume(ti, si) = volume_v;
    panel.market_cap(ti, si) = mcap_v;
    panel.mask(ti, si) = close_v > 0.0 && mcap_v > 0.0 && volume_v >= 0.0 &&
                         std::isfinite(close_v) && std::isfinite(mcap_v);
  }

  // Drop securities with too little valid history.
  std::vector<int> keep;
  for (int i = 0; i < n; ++i) {
    int valid = 0;
    for (int r = 0; r < t; ++r) valid += panel.mask(r, i) ? 1 : 0;
    if (valid >= spec.min_history) keep.push_back(i);
    else log_info("dropping " + securities[i] + ": only " +
                  std::to_string(valid) + " valid days");
  }
  if (keep.empty()) {
    throw DomainError(path + ": empty universe after history filter (min " +
                      std::to_string(spec.min_history) + " valid days)");
  }
  if (static_cast<int>(keep.size()) != n) {
    PricePanel filtered;
    filtered.dates = panel.dates;
    const int m = static_cast<int>(keep.size());
    filtered.securities.reserve(m);
    filtered.open = Matrix(t, m);
    filtered.high = Matrix(t, m);
    filtered.low = Matrix(t, m);
    filtered.close = Matrix(t, m);
    filtered.volume = Matrix(t, m);
    filtered.market_cap = Matrix(t, m);
    filtered.industry = Eigen::VectorXi(m);
    filtered.mask = Mask(t, m);
    for (int j = 0; j < m; ++j) {
      const int i = keep[j];
      filtered.securities.push_back(panel.securities[i]);
      filtered.open.col(j) = panel.open.col(i);
      filtered.high.col(j) = panel.high.col(i);
      filtered.low.col(j) = panel.low.col(i);
      filtered.close.col(j) = panel.close.col(i);
      filtered.volume.col(j) = panel.volume.col(i);
      filtered.market_cap.col(j) = panel.market_cap.col(i);
      filtered.industry[j] = panel.industry[i];
      filtered.mask.col(j) = panel.mask.col(i);
    }
    panel = std::move(filtered);
  }

  panel.validate();
  return panel;
}

void write_panel(const PricePanel& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << "date,security_id,open,high,low,close,volume,market_cap,industry\n";
  for (int r = 0; r < panel.rows(); ++r) {
    for (int i = 0; i < panel.cols(); ++i) {
      out << panel.dates[r] << ',' << panel.securities[i] << ','
          << format_double(panel.open(r, i)) << ','
          << format_double(panel.high(r, i)) << ','
          << format_double(panel.low(r, i)) << ',';
      if (panel.mask(r, i)) {
        out << format_double(panel.close(r, i)) << ','
            << format_double(panel.volume(r, i)) << ','
            << format_double(panel.market_cap(r, i));
      } else {
        out << "0,0,0";
      }
      out << ',' << panel.industry[i] << '\n';
    }
  }
}

ReturnPanel forward_returns(const PricePanel& panel, int horizon) {
  const int t = panel.rows();
  const int n = panel.cols();
  if (horizon < 1 || horizon >= t) {
    throw ConfigError("invalid horizon " + std::to_string(horizon) +
                      " for panel with " + std::to_string(t) + " dates");
  }
  ReturnPanel out;
  out.horizon = horizon;
  out.alignment = ReturnAlignment::forward;
  out.returns = Matrix::Zero(t, n);
  out.mask = Mask::Constant(t, n, false);
  for (int r = 0; r + horizon < t; ++r) {
    for (int i = 0; i < n; ++i) {
      if (panel.mask(r, i) && panel.mask(r + horizon, i)) {
        out.returns(r, i) = panel.close(r + horizon, i) / panel.close(r, i) - 1.0;
        out.mask(r, i) = true;
      }
    }
  }
  return out;
}

ReturnPanel daily_returns(const PricePanel& panel) {
  const int t = panel.rows();
  const int n = panel.cols();
  ReturnPanel out;
  out.horizon = 1;
  out.alignment = ReturnAlignment::trailing;
  out.returns = Matrix::Zero(t, n);
  out.mask = Mask::Constant(t, n, false);
  for (int r = 1; r < t; ++r) {
    for (int i = 0; i < n; ++i) {
      if (panel.mask(r, i) && panel.mask(r - 1, i)) {
        out.returns(r, i) = panel.close(r, i) / panel.close(r - 1, i) - 1.0;
        out.mask(r, i) = true;
      }
    }
  }
  return out;
}

Mask universe_mask(const PricePanel& panel, double max_abs_daily_return) {
  if (!(max_abs_daily_return > 0.0)) {
    throw ConfigError("max_abs_daily_return must be positive");
  }
  ReturnPanel daily = daily_returns(panel);
  Mask out = panel.mask;
  for (int r = 0; r < panel.rows(); ++r) {
    for (int i = 0; i < panel.cols(); ++i) {
      if (daily.mask(r, i) &&
          std::abs(daily.returns(r, i)) > max_abs_daily_return) {
        out(r, i) = false;
      }
    }
  }
  return out;
}

Vector market_returns(const ReturnPanel& returns) {
  const int t = static_cast<int>(returns.returns.rows());
  Vector out(t);
  for (int r = 0; r < t; ++r) {
    double sum = 0.0;
    int count = 0;
    for (int i = 0; i < returns.returns.cols(); ++i) {
      if (returns.mask(r, i)) {
        sum += returns.returns(r, i);
        ++count;
      }
    }
    out[r] = count > 0 ? sum / count : std::nan("");
  }
  return out;
}

}  // namespace crossalpha
