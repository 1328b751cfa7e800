#pragma once

#include <memory>
#include <string>
#include <vector>

#include "crossalpha/factor.hpp"
#include "crossalpha/kernels.hpp"
#include "crossalpha/panel.hpp"

namespace crossalpha {

/// A parsed factor expression over panel columns, e.g.
///   delta(close,20)/lag(close,20) |> cross_rank
///
/// Grammar (whitespace insignificant):
///   pipeline := expr ( "|>" call )*
///   expr     := term (("+" | "-") term)*
///   term     := unary (("*" | "/") unary)*
///   unary    := "-" unary | primary
///   primary  := NUMBER | column | call | "(" expr ")"
///   call     := IDENT "(" expr ("," NUMBER)* ")"
///
/// Columns: open, high, low, close, volume, market_cap.
/// Kernels: rolling_mean|rolling_std|rolling_min|rolling_max|rolling_sum
///          (x, window), ewma(x, alpha), lag(x, window), delta(x, window),
///          cross_rank(x) or cross_rank(x, 1) for normalized ranks.
/// Elementwise: log(x), abs(x), sqrt(x), sign(x).
/// A piped call receives the piped value as its first argument:
///   x |> ewma(0.5) means ewma(x, 0.5).
class FactorExpr;

struct FactorPipeline {
  std::string name;
  std::string source;  // normalized expression text
  std::shared_ptr<const FactorExpr> root;

  /// Trailing input rows an evaluation chunk must provide (max lookback).
  int cache_rows() const;
};

/// Parses `name=expression`; errors cite the 1-based character position.
FactorPipeline parse_factor(const std::string& definition);
FactorPipeline parse_factor(const std::string& name, const std::string& expr);

/// Evaluates the pipeline over the whole panel in one pass.
FactorPanel evaluate(const FactorPipeline& pipeline, const PricePanel& panel);

/// Evaluates pipelines chunk by chunk, carrying kernel state between chunks;
/// output is bit-identical to direct evaluation for any chunk size that
/// satisfies chunk_days >= max cache_rows across specs.
std::vector<FactorPanel> evaluate_chunked(const PricePanel& panel,
                                          const std::vector<FactorPipeline>& specs,
                                          int chunk_days);

}  // namespace crossalpha
