#include "crossalpha/pipeline.hpp"

#include <cctype>
#include <cmath>
#include <map>
#include <optional>

#include "crossalpha/errors.hpp"

namespace crossalpha {

namespace {

enum class Column { open, high, low, close, volume, market_cap };

const std::map<std::string, Column>& column_names() {
  static const std::map<std::string, Column> names = {
      {"open", Column::open},       {"high", Column::high},
      {"low", Column::low},         {"close", Column::close},
      {"volume", Column::volume},   {"market_cap", Column::market_cap}};
  return names;
}

enum class UnaryFn { neg, log, abs, sqrt, sign };

}  // namespace

/// Expression tree node. `instantiate` builds a fresh stateful evaluator,
/// so one parsed pipeline can drive many runs.
class FactorExpr {
 public:
  virtual ~FactorExpr() = default;
  virtual int cache_rows() const = 0;

  class Eval {
   public:
    virtual ~Eval() = default;
    /// Computes this node's row for the panel row `t`.
    virtual void step(const PricePanel& panel, int t, Vector& values,
                      BoolRow& valid) = 0;
  };
  virtual std::unique_ptr<Eval> instantiate(int n_cols) const = 0;
};

namespace {

class ColumnExpr : public FactorExpr {
 public:
  explicit ColumnExpr(Column col) : col_(col) {}
  int cache_rows() const override { return 0; }

  class E : public Eval {
   public:
    explicit E(Column col) : col_(col) {}
    void step(const PricePanel& panel, int t, Vector& values,
              BoolRow& valid) override {
      const Matrix* m = nullptr;
      switch (col_) {
        case Column::open: m = &panel.open; break;
        case Column::high: m = &panel.high; break;
        case Column::low: m = &panel.low; break;
        case Column::close: m = &panel.close; break;
        case Column::volume: m = &panel.volume; break;
        case Column::market_cap: m = &panel.market_cap; break;
      }
      values = m->row(t).transpose();
      valid = panel.mask.row(t).transpose();
    }
   private:
    Column col_;
  };
  std::unique_ptr<Eval> instantiate(int) const override {
    return std::make_unique<E>(col_);
  }

 private:
  Column col_;
};

class ConstExpr : public FactorExpr {
 public:
  explicit ConstExpr(double v) : v_(v) {}
  int cache_rows() const override { return 0; }

  class E : public Eval {
   public:
    explicit E(double v) : v_(v) {}
    void step(const PricePanel&, int, Vector& values, BoolRow& valid) override {
      values.setConstant(v_);
      valid.setConstant(true);
    }
   private:
    double v_;
  };
  std::unique_ptr<Eval> instantiate(int) const override {
    return std::make_unique<E>(v_);
  }

 private:
  double v_;
};

class UnaryExpr : public FactorExpr {
 public:
  UnaryExpr(UnaryFn fn, std::shared_ptr<const FactorExpr> child)
      : fn_(fn), child_(std::move(child)) {}
  int cache_rows() const override { return child_->cache_rows(); }

  class E : public Eval {
   public:
    E(UnaryFn fn, std::unique_ptr<Eval> child)
        : fn_(fn), child_(std::move(child)) {}
    void step(const PricePanel& panel, int t, Vector& values,
              BoolRow& valid) override {
      child_->step(panel, t, values, valid);
      for (int i = 0; i < values.size(); ++i) {
        if (!valid[i]) continue;
        double v = values[i];
        switch (fn_) {
          case UnaryFn::neg: v = -v; break;
          case UnaryFn::log: v = std::log(v); break;
          case UnaryFn::abs: v = std::abs(v); break;
          case UnaryFn::sqrt: v = std::sqrt(v); break;
          case UnaryFn::sign: v = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); break;
        }
        if (std::isfinite(v)) {
          values[i] = v;
        } else {
          values[i] = 0.0;
          valid[i] = false;
        }
      }
    }
   private:
    UnaryFn fn_;
    std::unique_ptr<Eval> child_;
  };
  std::unique_ptr<Eval> instantiate(int n) const override {
    return std::make_unique<E>(fn_, child_->instantiate(n));
  }

 private:
  UnaryFn fn_;
  std::shared_ptr<const FactorExpr> child_;
};

class BinaryExpr : public FactorExpr {
 public:
  BinaryExpr(char op, std::shared_ptr<const FactorExpr> lhs,
             std::shared_ptr<const FactorExpr> rhs)
      : op_(op), lhs_(std::move(lhs)), rhs_(std::move(rhs)) {}
  int cache_rows() const override {
    return std::max(lhs_->cache_rows(), rhs_->cache_rows());
  }

  class E : public Eval {
   public:
    E(char op, std::unique_ptr<Eval> lhs, std::unique_ptr<Eval> rhs, int n)
        : op_(op), lhs_(std::move(lhs)), rhs_(std::move(rhs)),
          rv_(n), rvalid_(n) {}
    void step(const PricePanel& panel, int t, Vector& values,
              BoolRow& valid) override {
      lhs_->step(panel, t, values, valid);
      rhs_->step(panel, t, rv_, rvalid_);
      for (int i = 0; i < values.size(); ++i) {
        if (!(valid[i] && rvalid_[i])) {
          values[i] = 0.0;
          valid[i] = false;
          continue;
        }
        double v = values[i];
        switch (op_) {
          case '+': v += rv_[i]; break;
          case '-': v -= rv_[i]; break;
          case '*': v *= rv_[i]; break;
          case '/': v /= rv_[i]; break;
        }
        if (std::isfinite(v)) {
          values[i] = v;
        } else {
          values[i] = 0.0;
          valid[i] = false;
        }
      }
    }
   private:
    char op_;
    std::unique_ptr<Eval> lhs_, rhs_;
    Vector rv_;
    BoolRow rvalid_;
  };
  std::unique_ptr<Eval> instantiate(int n) const override {
    return std::make_unique<E>(op_, lhs_->instantiate(n), rhs_->instantiate(n), n);
  }

 private:
  char op_;
  std::shared_ptr<const FactorExpr> lhs_, rhs_;
};

class KernelExpr : public FactorExpr {
 public:
  KernelExpr(KernelSpec spec, std::shared_ptr<const FactorExpr> child)
      : spec_(spec), child_(std::move(child)) {
    spec_.validate();
  }
  int cache_rows() const override {
    int own = 0;
    if (is_rolling(spec_.kind) || spec_.kind == KernelKind::lag ||
        spec_.kind == KernelKind::delta) {
      own = spec_.window;
    } else if (spec_.kind == KernelKind::ewma) {
      own = 1;
    }
    return own + child_->cache_rows();
  }

  class E : public Eval {
   public:
    E(const KernelSpec& spec, std::unique_ptr<Eval> child, int n)
        : child_(std::move(child)), state_(KernelState::make(spec, n)) {}
    void step(const PricePanel& panel, int t, Vector& values,
              BoolRow& valid) override {
      child_->step(panel, t, values, valid);
      state_->step(values, valid);
    }
   private:
    std::unique_ptr<Eval> child_;
    std::unique_ptr<KernelState> state_;
  };
  std::unique_ptr<Eval> instantiate(int n) const override {
    return std::make_unique<E>(spec_, child_->instantiate(n), n);
  }

 private:
  KernelSpec spec_;
  std::shared_ptr<const FactorExpr> child_;
};

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Token {
  enum Kind { ident, number, punct, pipe, end } kind;
  std::string text;
  double value = 0.0;
  int pos = 0;  // 1-based character position
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { advance(); }
  const Token& peek() const { return tok_; }
  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (i_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[i_])))
      ++i_;
    tok_.pos = static_cast<int>(i_) + 1;
    if (i_ >= src_.size()) {
      tok_ = {Token::end, "", 0.0, tok_.pos};
      return;
    }
    const char c = src_[i_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i_;
      while (j < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_'))
        ++j;
      tok_ = {Token::ident, src_.substr(i_, j - i_), 0.0, tok_.pos};
      i_ = j;
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t j = i_;
      while (j < src_.size() &&
             (std::isdigit(static_cast<unsigned char>(src_[j])) ||
              src_[j] == '.' || src_[j] == 'e' || src_[j] == 'E' ||
              ((src_[j] == '+' || src_[j] == '-') && j > i_ &&
               (src_[j - 1] == 'e' || src_[j - 1] == 'E'))))
        ++j;
      const std::string text = src_.substr(i_, j - i_);
      try {
        tok_ = {Token::number, text, std::stod(text), tok_.pos};
      } catch (const std::exception&) {
        throw ParseError("bad number '" + text + "' at position " +
                         std::to_string(tok_.pos));
      }
      i_ = j;
      return;
    }
    if (c == '|' && i_ + 1 < src_.size() && src_[i_ + 1] == '>') {
      tok_ = {Token::pipe, "|>", 0.0, tok_.pos};
      i_ += 2;
      return;
    }
    if (std::string("+-*/(),").find(c) != std::string::npos) {
      tok_ = {Token::punct, std::string(1, c), 0.0, tok_.pos};
      ++i_;
      return;
    }
    throw ParseError(std::string("unexpected character '") + c +
                     "' at position " + std::to_string(tok_.pos));
  }

  std::string src_;
  std::size_t i_ = 0;
  Token tok_;
};

using ExprPtr = std::shared_ptr<const FactorExpr>;

class Parser {
 public:
  explicit Parser(const std::string& src) : lex_(src) {}

  ExprPtr parse_pipeline() {
    ExprPtr e = parse_expr();
    while (lex_.peek().kind == Token::pipe) {
      lex_.take();
      e = parse_piped_call(e);
    }
    expect_end();
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what, int pos) {
    throw ParseError(what + " at position " + std::to_string(pos));
  }

  void expect_end() {
    if (lex_.peek().kind != Token::end) {
      fail("unexpected trailing input", lex_.peek().pos);
    }
  }

  bool accept_punct(const char* p) {
    if (lex_.peek().kind == Token::punct && lex_.peek().text == p) {
      lex_.take();
      return true;
    }
    return false;
  }

  void expect_punct(const char* p) {
    if (!accept_punct(p)) fail(std::string("expected '") + p + "'", lex_.peek().pos);
  }

  ExprPtr parse_expr() {
    ExprPtr e = parse_term();
    while (lex_.peek().kind == Token::punct &&
           (lex_.peek().text == "+" || lex_.peek().text == "-")) {
      const char op = lex_.take().text[0];
      e = std::make_shared<BinaryExpr>(op, e, parse_term());
    }
    return e;
  }

  ExprPtr parse_term() {
    ExprPtr e = parse_unary();
    while (lex_.peek().kind == Token::punct &&
           (lex_.peek().text == "*" || lex_.peek().text == "/")) {
      const char op = lex_.take().text[0];
      e = std::make_shared<BinaryExpr>(op, e, parse_unary());
    }
    return e;
  }

  ExprPtr parse_unary() {
    if (lex_.peek().kind == Token::punct && lex_.peek().text == "-") {
      const int pos = lex_.take().pos;
      (void)pos;
      return std::make_shared<UnaryExpr>(UnaryFn::neg, parse_unary());
    }
    return parse_primary();
  }

  ExprPtr parse_primary() {
    const Token t = lex_.peek();
    if (t.kind == Token::number) {
      lex_.take();
      return std::make_shared<ConstExpr>(t.value);
    }
    if (t.kind == Token::punct && t.text == "(") {
      lex_.take();
      ExprPtr e = parse_expr();
      expect_punct(")");
      return e;
    }
    if (t.kind == Token::ident) {
      lex_.take();
      auto col = column_names().find(t.text);
      if (col != column_names().end()) {
        return std::make_shared<ColumnExpr>(col->second);
      }
      expect_punct("(");
      ExprPtr first = parse_expr();
      std::vector<double> extra;
      std::vector<int> extra_pos;
      while (accept_punct(",")) {
        const Token num = lex_.peek();
        if (num.kind != Token::number) fail("expected numeric argument", num.pos);
        lex_.take();
        extra.push_back(num.value);
        extra_pos.push_back(num.pos);
      }
      expect_punct(")");
      return make_call(t.text, t.pos, first, extra, extra_pos);
    }
    fail("expected expression", t.pos);
  }

  /// `x |> f` and `x |> f(a,...)`: x becomes f's first argument.
  ExprPtr parse_piped_call(ExprPtr piped) {
    const Token t = lex_.peek();
    if (t.kind != Token::ident) fail("expected kernel name after '|>'", t.pos);
    lex_.take();
    std::vector<double> extra;
    std::vector<int> extra_pos;
    if (accept_punct("(")) {
      if (!accept_punct(")")) {
        do {
          const Token num = lex_.peek();
          if (num.kind != Token::number) fail("expected numeric argument", num.pos);
          lex_.take();
          extra.push_back(num.value);
          extra_pos.push_back(num.pos);
        } while (accept_punct(","));
        expect_punct(")");
      }
    }
    return make_call(t.text, t.pos, piped, extra, extra_pos);
  }

  ExprPtr make_call(const std::string& name, int pos, ExprPtr arg,
                    const std::vector<double>& extra,
                    const std::vector<int>& extra_pos) {
    static const std::map<std::string, UnaryFn> unary = {
        {"log", UnaryFn::log}, {"abs", UnaryFn::abs},
        {"sqrt", UnaryFn::sqrt}, {"sign", UnaryFn::sign}};
    auto u = unary.find(name);
    if (u != unary.end()) {
      if (!extra.empty()) fail(name + " takes one argument", extra_pos[0]);
      return std::make_shared<UnaryExpr>(u->second, arg);
    }

    static const std::map<std::string, KernelKind> kernels = {
        {"rolling_mean", KernelKind::rolling_mean},
        {"rolling_std", KernelKind::rolling_std},
        {"rolling_min", KernelKind::rolling_min},
        {"rolling_max", KernelKind::rolling_max},
        {"rolling_sum", KernelKind::rolling_sum},
        {"cross_rank", KernelKind::cross_rank},
        {"ewma", KernelKind::ewma},
        {"lag", KernelKind::lag},
        {"delta", KernelKind::delta}};
    auto k = kernels.find(name);
    if (k == kernels.end()) fail("unknown function '" + name + "'", pos);

    KernelSpec spec{k->second};
    if (k->second == KernelKind::cross_rank) {
      if (extra.size() > 1) fail("cross_rank takes at most one flag", pos);
      spec.normalized = !extra.empty() && extra[0] != 0.0;
    } else if (k->second == KernelKind::ewma) {
      if (extra.size() != 1) fail("ewma needs a smoothing argument", pos);
      spec.alpha = extra[0];
    } else {
      if (extra.size() != 1) fail(name + " needs a window argument", pos);
      const double w = extra[0];
      if (w != std::floor(w) || w < 1) {
        fail(name + " window must be a positive integer", extra_pos[0]);
      }
      spec.window = static_cast<int>(w);
    }
    try {
      spec.validate();
    } catch (const ConfigError& e) {
      fail(e.what(), pos);
    }
    return std::make_shared<KernelExpr>(spec, arg);
  }

  Lexer lex_;
};

}  // namespace

int FactorPipeline::cache_rows() const { return root->cache_rows(); }

FactorPipeline parse_factor(const std::string& name, const std::string& expr) {
  if (name.empty()) throw ParseError("factor name must not be empty");
  Parser parser(expr);
  FactorPipeline p;
  p.name = name;
  p.source = expr;
  p.root = parser.parse_pipeline();
  return p;
}

FactorPipeline parse_factor(const std::string& definition) {
  const auto eq = definition.find('=');
  if (eq == std::string::npos) {
    throw ParseError("factor definition needs the form name=expression");
  }
  std::string name = definition.substr(0, eq);
  // trim
  while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back())))
    name.pop_back();
  std::size_t b = 0;
  while (b < name.size() && std::isspace(static_cast<unsigned char>(name[b]))) ++b;
  return parse_factor(name.substr(b), definition.substr(eq + 1));
}

namespace {

FactorPanel evaluate_rows(const FactorPipeline& pipeline, const PricePanel& panel,
                          FactorExpr::Eval& eval, int t_begin, int t_end,
                          FactorPanel* accum) {
  const int n = panel.cols();
  FactorPanel out;
  FactorPanel& dst = accum != nullptr ? *accum : out;
  if (accum == nullptr) {
    dst.name = pipeline.name;
    dst.lineage = {pipeline.source};
    dst.values = Matrix::Zero(panel.rows(), n);
    dst.mask = Mask::Constant(panel.rows(), n, false);
  }
  Vector row(n);
  BoolRow valid(n);
  for (int t = t_begin; t < t_end; ++t) {
    eval.step(panel, t, row, valid);
    dst.values.row(t) = row.transpose();
    dst.mask.row(t) = valid.transpose();
  }
  return out;
}

}  // namespace

FactorPanel evaluate(const FactorPipeline& pipeline, const PricePanel& panel) {
  auto eval = pipeline.root->instantiate(panel.cols());
  return evaluate_rows(pipeline, panel, *eval, 0, panel.rows(), nullptr);
}

std::vector<FactorPanel> evaluate_chunked(const PricePanel& panel,
                                          const std::vector<FactorPipeline>& specs,
                                          int chunk_days) {
  int max_lookback = 0;
  for (const auto& s : specs) max_lookback = std::max(max_lookback, s.cache_rows());
  if (chunk_days < max_lookback) {
    throw ConfigError("chunk_days " + std::to_string(chunk_days) +
                      " smaller than max pipeline lookback " +
                      std::to_string(max_lookback));
  }
  if (chunk_days < 1) throw ConfigError("chunk_days must be >= 1");

  std::vector<FactorPanel> out;
  out.reserve(specs.size());
  for (const auto& spec : specs) {
    FactorPanel panel_out;
    panel_out.name = spec.name;
    panel_out.lineage = {spec.source};
    panel_out.values = Matrix::Zero(panel.rows(), panel.cols());
    panel_out.mask = Mask::Constant(panel.rows(), panel.cols(), false);
    auto eval = spec.root->instantiate(panel.cols());
    for (int begin = 0; begin < panel.rows(); begin += chunk_days) {
      const int end = std::min(panel.rows(), begin + chunk_days);
      evaluate_rows(spec, panel, *eval, begin, end, &panel_out);
    }
    out.push_back(std::move(panel_out));
  }
  return out;
}

}  // namespace crossalpha
