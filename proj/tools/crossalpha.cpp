// crossalpha: cross-sectional factor research pipelines from one binary.
// Subcommands: synth, factors, neutralize, eval, backtest, optimize, version.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "crossalpha/backtest.hpp"
#include "crossalpha/combine.hpp"
#include "crossalpha/config.hpp"
#include "crossalpha/csv.hpp"
#include "crossalpha/errors.hpp"
#include "crossalpha/evaluate.hpp"
#include "crossalpha/factor.hpp"
#include "crossalpha/kernels.hpp"
#include "crossalpha/log.hpp"
#include "crossalpha/neutralize.hpp"
#include "crossalpha/optimize.hpp"
#include "crossalpha/panel.hpp"
#include "crossalpha/parallel.hpp"
#include "crossalpha/pipeline.hpp"
#include "crossalpha/risk.hpp"
#include "crossalpha/synth.hpp"

namespace {

using namespace crossalpha;

constexpr const char* kVersion = "0.1.0";

struct GlobalArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  int threads = 0;
};

void write_manifest(const std::string& path, const std::string& subcommand,
                    const GlobalArgs& g, const RunConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write manifest: " + path);
  out << "crossalpha_version=" << kVersion << "\n";
  out << "subcommand=" << subcommand << "\n";
  out << "seed=" << g.seed << "\n";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(config_hash(cfg)));
  out << "config_hash=" << buf << "\n";
  out << "--- config ---\n" << dump_config(cfg);
}

std::vector<FactorPanel> load_factor_dir(const std::string& dir,
                                         const PricePanel& panel) {
  std::vector<FactorPanel> factors;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    factors.push_back(read_factor(f.string(), panel, f.stem().string()));
  }
  if (factors.empty()) {
    throw ConfigError("no factor CSVs found in " + dir);
  }
  return factors;
}

int cmd_synth(const GlobalArgs& g, const RunConfig& cfg,
              const std::string& out_path, const std::string& factor_out) {
  auto [panel, factor] = generate_market(cfg.synth, g.seed);
  write_panel(panel, out_path);
  if (!factor_out.empty()) write_factor(factor, panel, factor_out);
  write_manifest(out_path + ".manifest", "synth", g, cfg);
  log_info("synth: wrote " + std::to_string(panel.rows()) + "x" +
           std::to_string(panel.cols()) + " panel to " + out_path);
  return 0;
}

int cmd_factors(const GlobalArgs& g, const RunConfig& cfg,
                const std::string& panel_path, const std::string& out_dir,
                const std::vector<std::string>& defs, int chunk_days,
                int momvol_days, int beta_window) {
  LoadSpec spec;
  spec.min_history = cfg.min_history;
  const PricePanel panel = load_panel(panel_path, spec);

  std::vector<FactorPipeline> pipelines;
  for (const auto& [name, expr] : cfg.factor_defs) {
    pipelines.push_back(parse_factor(name, expr));
  }
  for (const auto& d : defs) pipelines.push_back(parse_factor(d));

  std::filesystem::create_directories(out_dir);
  std::vector<FactorPanel> outputs;
  if (!pipelines.empty()) {
    if (chunk_days > 0) {
      outputs = evaluate_chunked(panel, pipelines, chunk_days);
    } else {
      for (const auto& p : pipelines) outputs.push_back(evaluate(p, panel));
    }
  }
  if (momvol_days > 0) outputs.push_back(alpha_momentum_volume(panel, momvol_days));
  if (beta_window > 0) outputs.push_back(rolling_beta(panel, Vector(), beta_window));
  if (outputs.empty()) {
    throw ConfigError("factors: nothing to compute (no definitions given)");
  }
  for (const auto& f : outputs) {
    write_factor(f, panel, out_dir + "/" + f.name + ".csv");
  }
  write_manifest(out_dir + "/manifest.txt", "factors", g, cfg);
  log_info("factors: wrote " + std::to_string(outputs.size()) + " factors");
  return 0;
}

int cmd_neutralize(const GlobalArgs& g, const RunConfig& cfg,
                   const std::string& panel_path, const std::string& factors_dir,
                   const std::string& out_dir, const std::string& report_path) {
  LoadSpec spec;
  spec.min_history = cfg.min_history;
  const PricePanel panel = load_panel(panel_path, spec);
  const std::vector<FactorPanel> factors = load_factor_dir(factors_dir, panel);
  auto [neutral, report] = neutralize_pipeline(factors, panel, cfg.neutralize);
  std::filesystem::create_directories(out_dir);
  for (const auto& f : neutral) {
    write_factor(f, panel, out_dir + "/" + f.name + ".csv");
  }
  if (!report_path.empty()) report.write_csv(report_path, panel.dates);
  write_manifest(out_dir + "/manifest.txt", "neutralize", g, cfg);
  return 0;
}

int cmd_eval(const GlobalArgs& g, const RunConfig& cfg,
             const std::string& panel_path, const std::string& factors_dir,
             const std::string& report_path) {
  LoadSpec spec;
  spec.min_history = cfg.min_history;
  const PricePanel panel = load_panel(panel_path, spec);
  const std::vector<FactorPanel> factors = load_factor_dir(factors_dir, panel);
  std::vector<FactorReport> reports;
  for (const auto& f : factors) {
    reports.push_back(
        evaluate_factor(f, panel, cfg.eval_horizon, cfg.eval_method));
  }
  write_reports_csv(reports, report_path);
  write_manifest(report_path + ".manifest", "eval", g, cfg);
  const auto accepted = quality_filter(reports, cfg.quality);
  log_info("eval: " + std::to_string(accepted.size()) + "/" +
           std::to_string(reports.size()) + " factors pass the quality filter");
  return 0;
}

int cmd_backtest(const GlobalArgs& g, const RunConfig& cfg,
                 const std::string& panel_path, const std::string& factors_dir,
                 const std::string& out_dir) {
  LoadSpec spec;
  spec.min_history = cfg.min_history;
  const PricePanel panel = load_panel(panel_path, spec);
  const std::vector<FactorPanel> factors = load_factor_dir(factors_dir, panel);
  const BacktestResult result = run_backtest(panel, factors, cfg.backtest);
  const AttributionReport attribution =
      attribution_report(result, factors, panel);
  write_backtest_bundle(result, attribution, panel, out_dir);
  write_manifest(out_dir + "/manifest.txt", "backtest", g, cfg);
  std::cout << "periods: " << result.period_returns.size()
            << "  annualized_return: " << result.metrics.annualized_return
            << "  sharpe: "
            << (result.metrics.sharpe ? std::to_string(*result.metrics.sharpe)
                                      : "undefined")
            << "  max_drawdown: " << result.metrics.max_drawdown << "\n";
  return 0;
}

int cmd_optimize(const GlobalArgs& g, const RunConfig& cfg,
                 const std::string& mu_path, const std::string& risk_dir,
                 const std::string& out_path) {
  // mu CSV: security_id,mu,sector[,prev_weight[,cost]]
  CsvTable table = read_csv(mu_path);
  const int c_id = table.column("security_id");
  const int c_mu = table.column("mu");
  const int c_sector = table.column("sector");
  const int c_prev = table.column("prev_weight");
  const int c_cost = table.column("cost");
  if (c_id < 0 || c_mu < 0 || c_sector < 0) {
    throw ParseError(mu_path + ": need columns security_id,mu,sector");
  }
  const int n = static_cast<int>(table.rows.size());
  if (n == 0) throw DomainError(mu_path + ": empty universe");

  std::vector<std::string> ids(n);
  PortfolioProblem prob;
  prob.mu_hat = Vector(n);
  prob.sectors = Eigen::VectorXi(n);
  prob.prev_weights = Vector::Zero(n);
  prob.costs = Vector::Constant(n, cfg.opt_cost);
  for (int i = 0; i < n; ++i) {
    const auto& row = table.rows[i];
    const int line = table.line_numbers[i];
    ids[i] = row[c_id];
    prob.mu_hat[i] = parse_double(row[c_mu], line);
    prob.sectors[i] = static_cast<int>(parse_long(row[c_sector], line));
    if (c_prev >= 0) prob.prev_weights[i] = parse_double(row[c_prev], line);
    if (c_cost >= 0) prob.costs[i] = parse_double(row[c_cost], line);
  }

  std::vector<std::string> risk_ids;
  const RiskModel model = read_risk_model(risk_dir, &risk_ids);
  if (risk_ids != ids) {
    throw DomainError("optimize: risk model universe does not match " + mu_path);
  }
  prob.risk = assemble(model);
  prob.lambda_risk = cfg.opt_lambda_risk;
  prob.gamma_tc = cfg.opt_gamma_tc;
  prob.w_max = cfg.opt_w_max;
  prob.leverage = cfg.opt_leverage;

  SolverOptions opts;
  opts.tol = cfg.opt_tol;
  opts.max_iter = cfg.opt_max_iter;
  const PortfolioSolution sol = solve(prob, std::nullopt, opts);

  std::ofstream out(out_path);
  if (!out) throw ConfigError("cannot write " + out_path);
  out << "security_id,weight\n";
  for (int i = 0; i < n; ++i) {
    out << ids[i] << ',' << format_double(sol.weights[i]) << '\n';
  }
  write_manifest(out_path + ".manifest", "optimize", g, cfg);

  const char* status = sol.status == SolveStatus::optimal ? "optimal"
                       : sol.status == SolveStatus::max_iter ? "max_iter"
                                                             : "infeasible";
  std::cout << "status: " << status << "  iterations: " << sol.iterations
            << "  objective: " << sol.objective
            << "  max_residual: " << sol.constraint_residuals.max() << "\n";
  return sol.status == SolveStatus::optimal ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-sectional alpha research engine"};
  app.footer(describe_config_keys());
  app.require_subcommand(0, 1);
  app.fallthrough();  // global flags may follow the subcommand name

  GlobalArgs g;
  int min_history_flag = -1;
  app.add_option("--config", g.config_path, "config file (INI sections)");
  app.add_option("--seed", g.seed, "seed for all randomness (default 0)");
  app.add_option("--threads", g.threads,
                 "worker threads (0 = machine parallelism); affects speed only");
  app.add_option("--min-history", min_history_flag,
                 "panel loader: minimum valid days per security");

  auto* version_cmd = app.add_subcommand("version", "print version");

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic market");
  std::string synth_out = "panel.csv", synth_factor_out;
  int synth_securities = -1, synth_days = -1, synth_horizon = -1;
  double synth_strength = -1.0;
  synth_cmd->add_option("--out", synth_out, "panel CSV path");
  synth_cmd->add_option("--factor-out", synth_factor_out,
                        "planted factor CSV path");
  synth_cmd->add_option("--securities", synth_securities, "universe size");
  synth_cmd->add_option("--days", synth_days, "calendar length");
  synth_cmd->add_option("--signal-strength", synth_strength,
                        "planted signal strength in [0,1]");
  synth_cmd->add_option("--signal-horizon", synth_horizon,
                        "planted signal horizon (days)");

  auto* factors_cmd = app.add_subcommand("factors", "evaluate factor pipelines");
  std::string factors_panel, factors_out = "factors";
  std::vector<std::string> factor_defs;
  int chunk_days = 0, momvol_days = 0, beta_window = 0;
  factors_cmd->add_option("--panel", factors_panel, "panel CSV")->required();
  factors_cmd->add_option("--out-dir", factors_out, "output directory");
  factors_cmd->add_option("--factor", factor_defs,
                          "factor definition name=expression (repeatable)");
  factors_cmd->add_option("--chunk-days", chunk_days,
                          "evaluate in chunks of this many days (0 = off)");
  factors_cmd->add_option("--alpha-momentum-volume", momvol_days,
                          "emit the built-in momentum*volume factor at this lag");
  factors_cmd->add_option("--rolling-beta", beta_window,
                          "emit the built-in rolling market beta at this window");

  auto* neut_cmd = app.add_subcommand("neutralize", "bias-correct factors");
  std::string neut_panel, neut_factors, neut_out = "neutralized", neut_report;
  neut_cmd->add_option("--panel", neut_panel, "panel CSV")->required();
  neut_cmd->add_option("--factors", neut_factors, "factor CSV directory")
      ->required();
  neut_cmd->add_option("--out-dir", neut_out, "output directory");
  neut_cmd->add_option("--report", neut_report, "coefficient report CSV");

  auto* eval_cmd = app.add_subcommand("eval", "factor IC/IR reports");
  std::string eval_panel, eval_factors, eval_report = "report.csv";
  int eval_horizon_flag = -1;
  std::string eval_method_flag;
  eval_cmd->add_option("--panel", eval_panel, "panel CSV")->required();
  eval_cmd->add_option("--factors", eval_factors, "factor CSV directory")
      ->required();
  eval_cmd->add_option("--report", eval_report, "output report CSV");
  eval_cmd->add_option("--horizon", eval_horizon_flag, "forward-return horizon");
  eval_cmd->add_option("--method", eval_method_flag, "spearman or pearson");

  auto* backtest_cmd = app.add_subcommand("backtest", "walk-forward simulation");
  std::string bt_panel, bt_factors, bt_out = "backtest_out";
  backtest_cmd->add_option("--panel", bt_panel, "panel CSV")->required();
  backtest_cmd->add_option("--factors", bt_factors, "factor CSV directory")
      ->required();
  backtest_cmd->add_option("--out", bt_out, "result bundle directory");

  auto* opt_cmd = app.add_subcommand("optimize", "solve one portfolio problem");
  std::string opt_mu, opt_risk, opt_out = "weights.csv";
  opt_cmd->add_option("--mu", opt_mu, "expected returns CSV")->required();
  opt_cmd->add_option("--risk", opt_risk, "risk model directory")->required();
  opt_cmd->add_option("--out", opt_out, "weights CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    set_worker_threads(g.threads);
    RunConfig cfg = load_config(g.config_path);
    // flag overrides
    if (min_history_flag >= 0) cfg.min_history = min_history_flag;
    if (synth_securities > 0) cfg.synth.n_securities = synth_securities;
    if (synth_days > 0) cfg.synth.n_days = synth_days;
    if (synth_strength >= 0.0) cfg.synth.signal.strength = synth_strength;
    if (synth_horizon > 0) cfg.synth.signal.horizon = synth_horizon;
    cfg.synth.signal.seed = g.seed;
    if (eval_horizon_flag > 0) cfg.eval_horizon = eval_horizon_flag;
    if (!eval_method_flag.empty()) {
      if (eval_method_flag == "spearman") cfg.eval_method = CorrMethod::spearman;
      else if (eval_method_flag == "pearson") cfg.eval_method = CorrMethod::pearson;
      else throw ConfigError("--method must be spearman or pearson");
    }

    if (version_cmd->parsed()) {
      std::cout << "crossalpha " << kVersion << "\n";
      return 0;
    }
    if (synth_cmd->parsed()) {
      return cmd_synth(g, cfg, synth_out, synth_factor_out);
    }
    if (factors_cmd->parsed()) {
      return cmd_factors(g, cfg, factors_panel, factors_out, factor_defs,
                         chunk_days, momvol_days, beta_window);
    }
    if (neut_cmd->parsed()) {
      return cmd_neutralize(g, cfg, neut_panel, neut_factors, neut_out,
                            neut_report);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(g, cfg, eval_panel, eval_factors, eval_report);
    }
    if (backtest_cmd->parsed()) {
      return cmd_backtest(g, cfg, bt_panel, bt_factors, bt_out);
    }
    if (opt_cmd->parsed()) {
      return cmd_optimize(g, cfg, opt_mu, opt_risk, opt_out);
    }
    std::cout << app.help();
    return 2;
  } catch (const ConfigError& e) {
    log_error(e.what());
    return 2;
  } catch (const ParseError& e) {
    log_error(e.what());
    return 1;
  } catch (const DomainError& e) {
    log_error(e.what());
    return 1;
  } catch (const std::exception& e) {
    log_error(e.what());
    return 1;
  }
}
