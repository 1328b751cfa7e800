#include "crossalpha/config.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <fstream>
#include <map>
#include <sstream>

#include "crossalpha/csv.hpp"
#include "crossalpha/errors.hpp"

namespace crossalpha {

namespace {

struct Key {
  std::string section;
  std::string name;
  std::string description;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double to_double(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": not a number: '" + v + "'");
  }
}

int to_int(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const int x = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": not an integer: '" + v + "'");
  }
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key " + key + ": expected true/false: '" + v + "'");
}

std::string stages_to_string(const std::vector<NeutralizeStage>& stages) {
  std::string out;
  for (const auto s : stages) {
    if (!out.empty()) out += ",";
    out += s == NeutralizeStage::industry ? "industry"
          : s == NeutralizeStage::size ? "size" : "pca";
  }
  return out;
}

std::vector<NeutralizeStage> stages_from_string(const std::string& v) {
  std::vector<NeutralizeStage> out;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (part.empty()) continue;
    if (part == "industry") out.push_back(NeutralizeStage::industry);
    else if (part == "size") out.push_back(NeutralizeStage::size);
    else if (part == "pca") out.push_back(NeutralizeStage::pca);
    else throw ConfigError("unknown neutralization stage '" + part + "'");
  }
  return out;
}

#define NUM_KEY(section, name, field, desc)                                  \
  Key{section, name, desc,                                                   \
      [](const RunConfig& c) { return format_double(c.field); },             \
      [](RunConfig& c, const std::string& v) {                               \
        c.field = to_double(v, std::string(section) + "." + name);           \
      }}
#define INT_KEY(section, name, field, desc)                                  \
  Key{section, name, desc,                                                   \
      [](const RunConfig& c) { return std::to_string(c.field); },            \
      [](RunConfig& c, const std::string& v) {                               \
        c.field = to_int(v, std::string(section) + "." + name);              \
      }}
#define BOOL_KEY(section, name, field, desc)                                 \
  Key{section, name, desc,                                                   \
      [](const RunConfig& c) { return c.field ? "true" : "false"; },         \
      [](RunConfig& c, const std::string& v) {                               \
        c.field = to_bool(v, std::string(section) + "." + name);             \
      }}

const std::vector<Key>& key_table() {
  static const std::vector<Key> keys = {
      INT_KEY("panel", "min_history", min_history,
              "drop securities with fewer valid days"),

      INT_KEY("synth", "securities", synth.n_securities, "universe size"),
      INT_KEY("synth", "days", synth.n_days, "calendar length"),
      INT_KEY("synth", "industries", synth.n_industries,
              "industry count, assigned round-robin"),
      NUM_KEY("synth", "signal_strength", synth.signal.strength,
              "planted factor correlation with forward returns"),
      INT_KEY("synth", "signal_horizon", synth.signal.horizon,
              "forward-return horizon of the planted signal (days)"),
      NUM_KEY("synth", "mu_low", synth.ranges.mu.first, "drift range low (1/yr)"),
      NUM_KEY("synth", "mu_high", synth.ranges.mu.second, "drift range high"),
      NUM_KEY("synth", "sigma_low", synth.ranges.sigma.first,
              "volatility range low (1/sqrt yr)"),
      NUM_KEY("synth", "sigma_high", synth.ranges.sigma.second,
              "volatility range high"),
      NUM_KEY("synth", "s0_low", synth.ranges.s0.first, "initial price low"),
      NUM_KEY("synth", "s0_high", synth.ranges.s0.second, "initial price high"),

      NUM_KEY("neutralize", "alpha0", neutralize.alpha0,
              "base neutralization strength in [0,1]"),
      NUM_KEY("neutralize", "beta_vol", neutralize.beta_vol,
              "volatility sensitivity of the adaptive strength"),
      INT_KEY("neutralize", "vol_window_short", neutralize.vol_window_short,
              "short realized-vol window (days)"),
      INT_KEY("neutralize", "vol_window_long", neutralize.vol_window_long,
              "long realized-vol window (days)"),
      INT_KEY("neutralize", "pca_k", neutralize.pca_k,
              "principal components to remove"),
      BOOL_KEY("neutralize", "huber", neutralize.huber,
               "Huber-weighted regressions (c=1.345)"),
      Key{"neutralize", "stages", "ordered stages: industry,size,pca",
          [](const RunConfig& c) { return stages_to_string(c.neutralize.stages); },
          [](RunConfig& c, const std::string& v) {
            c.neutralize.stages = stages_from_string(v);
          }},

      INT_KEY("eval", "horizon", eval_horizon, "IC forward-return horizon"),
      Key{"eval", "method", "correlation method: spearman or pearson",
          [](const RunConfig& c) {
            return c.eval_method == CorrMethod::spearman ? "spearman" : "pearson";
          },
          [](RunConfig& c, const std::string& v) {
            if (v == "spearman") c.eval_method = CorrMethod::spearman;
            else if (v == "pearson") c.eval_method = CorrMethod::pearson;
            else throw ConfigError("eval.method must be spearman or pearson");
          }},
      NUM_KEY("eval", "min_abs_mean_ic", quality.min_abs_mean_ic,
              "quality filter: |mean IC| threshold"),
      NUM_KEY("eval", "min_ir", quality.min_ir, "quality filter: |IR| threshold"),
      NUM_KEY("eval", "min_positive_rate", quality.min_positive_rate,
              "quality filter: directional consistency threshold"),

      INT_KEY("backtest", "train_start", backtest.train_start,
              "first training date index"),
      INT_KEY("backtest", "train_end", backtest.train_end,
              "last training date index (-1: 60% of panel)"),
      INT_KEY("backtest", "test_end", backtest.test_end,
              "last test date index (-1: panel end)"),
      INT_KEY("backtest", "retrain_every", backtest.retrain_every,
              "combiner refit cadence (days)"),
      INT_KEY("backtest", "rebalance_every", backtest.rebalance_every,
              "holding period and forecast horizon (days)"),
      INT_KEY("backtest", "purge_gap", backtest.purge_gap,
              "gap between fit window and decision date (-1: horizon)"),
      NUM_KEY("backtest", "cost_rate", backtest.cost_rate,
              "transaction cost per unit turnover"),
      NUM_KEY("backtest", "solver_cost_rate", backtest.solver_cost_rate,
              "cost rate the optimizer plans with (-1: cost_rate)"),
      NUM_KEY("backtest", "ridge_lambda", backtest.ridge_lambda,
              "combiner ridge penalty"),
      BOOL_KEY("backtest", "combiner_standardize", backtest.combiner_standardize,
               "z-score exposures with training-window stats"),
      INT_KEY("backtest", "risk_window", backtest.risk_window,
              "risk estimation window (days)"),
      NUM_KEY("backtest", "risk_ewma_lambda", backtest.risk_ewma_lambda,
              "EWMA decay for the factor covariance"),
      NUM_KEY("backtest", "risk_epsilon", backtest.risk_epsilon_annual,
              "covariance ridge (annualized return^2)"),
      NUM_KEY("backtest", "idio_floor", backtest.idio_floor,
              "idiosyncratic variance floor"),
      NUM_KEY("backtest", "lambda_risk", backtest.lambda_risk, "risk aversion"),
      NUM_KEY("backtest", "gamma_tc", backtest.gamma_tc, "turnover cost aversion"),
      NUM_KEY("backtest", "w_max", backtest.w_max, "per-name weight bound"),
      NUM_KEY("backtest", "leverage", backtest.leverage, "gross exposure limit"),
      NUM_KEY("backtest", "solver_tol", backtest.solver_tol,
              "QP residual tolerance"),
      INT_KEY("backtest", "solver_max_iter", backtest.solver_max_iter,
              "QP iteration limit"),
      INT_KEY("backtest", "periods_per_year", backtest.periods_per_year,
              "annualization factor"),

      NUM_KEY("optimize", "lambda_risk", opt_lambda_risk, "risk aversion"),
      NUM_KEY("optimize", "gamma_tc", opt_gamma_tc, "turnover cost aversion"),
      NUM_KEY("optimize", "cost", opt_cost, "default per-name cost rate"),
      NUM_KEY("optimize", "w_max", opt_w_max, "per-name weight bound"),
      NUM_KEY("optimize", "leverage", opt_leverage, "gross exposure limit"),
      NUM_KEY("optimize", "tol", opt_tol, "QP residual tolerance"),
      INT_KEY("optimize", "max_iter", opt_max_iter, "QP iteration limit"),
  };
  return keys;
}

#undef NUM_KEY
#undef INT_KEY
#undef BOOL_KEY

const Key* find_key(const std::string& section, const std::string& name) {
  for (const auto& k : key_table()) {
    if (k.section == section && k.name == name) return &k;
  }
  return nullptr;
}

}  // namespace

void apply_config_text(const std::string& text, RunConfig* cfg) {
  std::stringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      static const char* known[] = {"panel", "synth",    "factors",
                                    "neutralize", "eval", "backtest",
                                    "optimize"};
      if (std::find_if(std::begin(known), std::end(known), [&](const char* s) {
            return section == s;
          }) == std::end(known)) {
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": key outside any section");
    }
    if (section == "factors") {
      cfg->factor_defs.emplace_back(key, value);
      continue;
    }
    const Key* k = find_key(section, key);
    if (k == nullptr) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": unknown key " + section + "." + key);
    }
    k->set(*cfg, value);
  }
}

RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(ss.str(), &cfg);
  return cfg;
}

std::string dump_config(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& k : key_table()) {
    if (k.section != section) {
      section = k.section;
      out += "[" + section + "]\n";
      if (section == "neutralize" && !cfg.factor_defs.empty()) {
        // factors precede neutralize in section order
      }
    }
    out += k.name + " = " + k.get(cfg) + "\n";
  }
  if (!cfg.factor_defs.empty()) {
    out += "[factors]\n";
    for (const auto& [name, expr] : cfg.factor_defs) {
      out += name + " = " + expr + "\n";
    }
  }
  return out;
}

std::uint64_t config_hash(const RunConfig& cfg) {
  const std::string dump = dump_config(cfg);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string describe_config_keys() {
  std::string out = "Config keys (section.key = default): \n";
  RunConfig defaults;
  for (const auto& k : key_table()) {
    out += "  " + k.section + "." + k.name + " = " + k.get(defaults) + "  # " +
           k.description + "\n";
  }
  out += "  factors.<name> = <expression>  # factor pipeline definitions\n";
  return out;
}

}  // namespace crossalpha
