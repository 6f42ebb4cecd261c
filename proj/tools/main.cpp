// Command-line front end: sweep | verify | diagnose | tune-beta0.
// Option precedence: built-in defaults < --config JSON < explicit flags.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nbwpg/commands.hpp"

namespace {

using nbwpg::GridSpec;
using nlohmann::json;

GridSpec parse_grid_text(const std::string& text, const GridSpec& fallback) {
  if (text.empty()) return fallback;
  GridSpec g;
  char extra = 0;
  if (std::sscanf(text.c_str(), "%lf,%lf,%lf%c", &g.min, &g.max, &g.step,
                  &extra) != 3) {
    throw std::invalid_argument("--grid expects min,max,step, got: " + text);
  }
  return g;
}

std::optional<nbwpg::Vec2> parse_theta_text(const std::string& text) {
  if (text.empty()) return std::nullopt;
  double a = 0.0, b = 0.0;
  char extra = 0;
  if (std::sscanf(text.c_str(), "%lf,%lf%c", &a, &b, &extra) != 2) {
    throw std::invalid_argument("--theta expects theta0,theta1, got: " + text);
  }
  return nbwpg::Vec2(a, b);
}

// The config file is applied before flag parsing, so it has to be located
// with a plain argv scan rather than through the parser it feeds.
json load_config(int argc, char** argv) {
  std::string path;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) {
      path = argv[i + 1];
    } else if (arg.rfind("--config=", 0) == 0) {
      path = arg.substr(9);
    }
  }
  if (path.empty()) return json::object();
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read config file: " + path);
  json j = json::parse(f);
  if (!j.is_object()) {
    throw std::runtime_error("config file must hold a JSON object: " + path);
  }
  return j;
}

template <typename T>
void from_config(const json& cfg, const char* key, T& out) {
  if (cfg.contains(key)) cfg.at(key).get_to(out);
}

void grid_from_config(const json& cfg, const char* key, GridSpec& out) {
  if (!cfg.contains(key)) return;
  const json& g = cfg.at(key);
  if (g.is_array() && g.size() == 3) {
    out.min = g[0].get<double>();
    out.max = g[1].get<double>();
    out.step = g[2].get<double>();
    return;
  }
  if (g.is_object()) {
    from_config(g, "min", out.min);
    from_config(g, "max", out.max);
    from_config(g, "step", out.step);
    return;
  }
  throw std::runtime_error("config grid must be [min,max,step] or an object");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Policy-gradient optimization toward nearly Blackwell optimal policies "
      "in finite average-reward MDPs"};
  app.require_subcommand(1);

  json cfg;
  try {
    cfg = load_config(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  std::string config_path;  // recognized everywhere; consumed by load_config

  // sweep
  nbwpg::SweepOptions sweep_opts;
  sweep_opts.seed = nbwpg::default_seed();
  std::string sweep_method = "nbw";
  std::string sweep_mode = "exact";
  std::string sweep_scheme = "identity";
  std::string sweep_grid_text;
  from_config(cfg, "env", sweep_opts.env);
  from_config(cfg, "method", sweep_method);
  from_config(cfg, "mode", sweep_mode);
  from_config(cfg, "scheme", sweep_scheme);
  from_config(cfg, "seed", sweep_opts.seed);
  from_config(cfg, "t_abs_hat", sweep_opts.t_abs_hat);
  if (cfg.contains("beta0")) sweep_opts.beta0 = cfg.at("beta0").get<double>();
  from_config(cfg, "gamma", sweep_opts.gamma);
  from_config(cfg, "phi", sweep_opts.phi);
  from_config(cfg, "out", sweep_opts.out);
  from_config(cfg, "threads", sweep_opts.threads);
  grid_from_config(cfg, "grid", sweep_opts.grid);

  CLI::App* sweep = app.add_subcommand(
      "sweep", "optimize from every start on a parameter grid; write CSV+JSON");
  sweep->add_option("--env", sweep_opts.env,
                    "built-in environment name or path to an env JSON file");
  sweep->add_option("--method", sweep_method,
                    "nbw | bias_only | discounted | penalty");
  sweep->add_option("--scheme", sweep_scheme,
                    "bias_only preconditioner: identity | hessian | "
                    "fisher_analytic | fisher_sampling | devmat");
  sweep->add_option("--t-abs-hat", sweep_opts.t_abs_hat,
                    "truncation of the sampling bias Fisher");
  sweep->add_option("--mode", sweep_mode, "exact | sampling");
  sweep->add_option("--seed", sweep_opts.seed,
                    "base RNG seed (default: NBWPG_SEED env var, else 0)");
  sweep->add_option("--beta0", sweep_opts.beta0,
                    "initial barrier weight (default: per-environment)");
  sweep->add_option("--gamma", sweep_opts.gamma,
                    "discount factor for method=discounted");
  sweep->add_option("--phi", sweep_opts.phi,
                    "penalty weight for method=penalty");
  sweep->add_option("--grid", sweep_grid_text,
                    "start grid as min,max,step (default -10,10,0.5)");
  sweep->add_option("--out", sweep_opts.out,
                    "output stem or .csv path (default sweep)");
  sweep->add_option("--threads", sweep_opts.threads,
                    "worker threads; 0 = hardware concurrency");
  sweep->add_option("--config", config_path, "JSON file with option defaults");

  // verify
  std::string verify_suite = "all";
  std::uint64_t verify_seed = nbwpg::default_seed();
  from_config(cfg, "suite", verify_suite);
  from_config(cfg, "seed", verify_seed);
  CLI::App* verify = app.add_subcommand(
      "verify", "run a published-value / property check suite");
  verify->add_option("suite", verify_suite,
                     "env_tables | gradients | fishers | estimators | all");
  verify->add_option("--seed", verify_seed, "seed for the random draws");
  verify->add_option("--config", config_path,
                     "JSON file with option defaults");

  // diagnose
  nbwpg::DiagnoseOptions diag_opts;
  diag_opts.seed = nbwpg::default_seed();
  std::string diag_theta_text;
  std::string diag_grid_text;
  from_config(cfg, "env", diag_opts.env);
  from_config(cfg, "seed", diag_opts.seed);
  from_config(cfg, "out", diag_opts.out);
  from_config(cfg, "threads", diag_opts.threads);
  from_config(cfg, "by_mixing_time", diag_opts.by_mixing_time);
  grid_from_config(cfg, "grid", diag_opts.grid);
  CLI::App* diagnose = app.add_subcommand(
      "diagnose",
      "bias-gradient decomposition errors for one policy or grouped by "
      "mixing time over a grid");
  diagnose->add_option("--env", diag_opts.env,
                       "built-in environment name or env JSON path");
  diagnose->add_option("--theta", diag_theta_text,
                       "policy parameters theta0,theta1 (default 0,0)");
  diagnose->add_flag("--by-mixing-time", diag_opts.by_mixing_time,
                     "aggregate the whole grid, grouped by mixing time");
  diagnose->add_option("--grid", diag_grid_text,
                       "grid for --by-mixing-time (default -10,10,0.1)");
  diagnose->add_option("--seed", diag_opts.seed, "base RNG seed (unused by "
                       "exact diagnostics; kept for interface uniformity)");
  diagnose->add_option("--out", diag_opts.out,
                       "output stem or .csv path (default decomposition)");
  diagnose->add_option("--threads", diag_opts.threads,
                       "worker threads; 0 = hardware concurrency");
  diagnose->add_option("--config", config_path,
                       "JSON file with option defaults");

  // tune-beta0
  nbwpg::TuneOptions tune_opts;
  tune_opts.seed = nbwpg::default_seed();
  std::string tune_mode = "exact";
  std::string tune_grid_text;
  from_config(cfg, "env", tune_opts.env);
  from_config(cfg, "mode", tune_mode);
  from_config(cfg, "seed", tune_opts.seed);
  from_config(cfg, "out", tune_opts.out);
  from_config(cfg, "threads", tune_opts.threads);
  from_config(cfg, "beta0s", tune_opts.beta0s);
  grid_from_config(cfg, "grid", tune_opts.grid);
  CLI::App* tune = app.add_subcommand(
      "tune-beta0", "sweep repeatedly across a ladder of barrier weights");
  tune->add_option("--env", tune_opts.env,
                   "built-in environment name or env JSON path");
  tune->add_option("--beta0s", tune_opts.beta0s,
                   "comma-separated barrier weights (default "
                   "0.01,0.1,1,10,100,1000,10000)")
      ->delimiter(',');
  tune->add_option("--mode", tune_mode, "exact | sampling");
  tune->add_option("--seed", tune_opts.seed, "base RNG seed");
  tune->add_option("--grid", tune_grid_text,
                   "start grid as min,max,step (default -10,10,0.5)");
  tune->add_option("--out", tune_opts.out,
                   "output stem or .csv path (default tune_beta0)");
  tune->add_option("--threads", tune_opts.threads,
                   "worker threads; 0 = hardware concurrency");
  tune->add_option("--config", config_path, "JSON file with option defaults");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sweep->parsed()) {
      sweep_opts.method = nbwpg::parse_method(sweep_method);
      sweep_opts.mode = nbwpg::parse_mode(sweep_mode);
      sweep_opts.scheme = nbwpg::parse_scheme(sweep_scheme);
      sweep_opts.grid = parse_grid_text(sweep_grid_text, sweep_opts.grid);
      const nbwpg::SweepResult r = nbwpg::cmd_sweep(sweep_opts);
      std::cout << "wrote " << r.csv_path << " and " << r.json_path << " ("
                << r.cells.size() << " cells, mean abs_bias_diff "
                << nbwpg::format_g9(r.mean_abs_bias_diff) << ")\n";
      return 0;
    }
    if (verify->parsed()) {
      return nbwpg::cmd_verify(verify_suite, verify_seed, std::cout);
    }
    if (diagnose->parsed()) {
      diag_opts.theta = parse_theta_text(diag_theta_text);
      diag_opts.grid = parse_grid_text(diag_grid_text, diag_opts.grid);
      nbwpg::cmd_diagnose(diag_opts);
      std::cout << "wrote " << diag_opts.out
                << (diag_opts.out.size() > 4 &&
                            diag_opts.out.rfind(".csv") ==
                                diag_opts.out.size() - 4
                        ? ""
                        : ".csv")
                << "\n";
      return 0;
    }
    if (tune->parsed()) {
      tune_opts.mode = nbwpg::parse_mode(tune_mode);
      tune_opts.grid = parse_grid_text(tune_grid_text, tune_opts.grid);
      const std::vector<nbwpg::TuneRow> rows = nbwpg::cmd_tune_beta0(tune_opts);
      for (const nbwpg::TuneRow& r : rows) {
        std::cout << "beta0 " << nbwpg::format_g9(r.beta0)
                  << ": mean abs_bias_diff "
                  << nbwpg::format_g9(r.mean_abs_bias_diff) << " (std "
                  << nbwpg::format_g9(r.std_abs_bias_diff) << ", "
                  << r.n_cells << " cells)\n";
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
