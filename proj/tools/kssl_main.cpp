// Command-line harness: dataset generators, spectral/SGD pretraining and the
// desk-scale experiment grids, all emitting deterministic CSV + JSON.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "kssl/experiments.hpp"

using namespace kssl;
using nlohmann::json;

namespace {

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw input_error("cannot open config file: " + path);
  json j;
  in >> j;
  return j;
}

json section(const json& cfg, const std::string& name) {
  return cfg.contains(name) ? cfg.at(name) : json::object();
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

RateGridConfig rate_grid_config(const json& j) {
  RateGridConfig c;
  c.n_pre_grid = get_or(j, "n_pre_grid", c.n_pre_grid);
  c.n_down_grid = get_or(j, "n_down_grid", c.n_down_grid);
  c.pre_trials = get_or(j, "pre_trials", c.pre_trials);
  c.down_trials_per_pre = get_or(j, "down_trials_per_pre", c.down_trials_per_pre);
  c.anchor_n_pre = get_or(j, "anchor_n_pre", c.anchor_n_pre);
  c.anchor_n_down = get_or(j, "anchor_n_down", c.anchor_n_down);
  c.saturation_n_pre = get_or(j, "saturation_n_pre", c.saturation_n_pre);
  c.k = get_or(j, "k", c.k);
  c.beta = get_or(j, "beta", c.beta);
  c.lambda = get_or(j, "lambda", c.lambda);
  c.m = get_or(j, "m", c.m);
  c.kernel_scale_factor = get_or(j, "kernel_scale_factor", c.kernel_scale_factor);
  c.moons.sigma = get_or(j, "sigma", c.moons.sigma);
  c.moons.moon_tau = get_or(j, "moon_tau", c.moons.moon_tau);
  c.moons.profile_amp = get_or(j, "profile_amp", c.moons.profile_amp);
  c.test_points = get_or(j, "test_points", c.test_points);
  c.gamma_grid = get_or(j, "gamma_grid", c.gamma_grid);
  c.val_fraction = get_or(j, "val_fraction", c.val_fraction);
  return c;
}

LambdaSweepConfig lambda_sweep_config(const json& j) {
  LambdaSweepConfig c;
  c.n = get_or(j, "n", c.n);
  c.d = get_or(j, "d", c.d);
  c.k = get_or(j, "k", c.k);
  c.beta = get_or(j, "beta", c.beta);
  c.lambda_grid = get_or(j, "lambda_grid", c.lambda_grid);
  c.trials = get_or(j, "trials", c.trials);
  c.test_points = get_or(j, "test_points", c.test_points);
  c.pinv_tol_rel = get_or(j, "pinv_tol_rel", c.pinv_tol_rel);
  c.gamma_grid = get_or(j, "gamma_grid", c.gamma_grid);
  c.val_fraction = get_or(j, "val_fraction", c.val_fraction);
  return c;
}

CapacityDemoConfig capacity_config(const json& j) {
  CapacityDemoConfig c;
  c.n = get_or(j, "n", c.n);
  c.m = get_or(j, "m", c.m);
  c.tiny_lambda = get_or(j, "tiny_lambda", c.tiny_lambda);
  c.moderate_lambda = get_or(j, "moderate_lambda", c.moderate_lambda);
  c.kernel_scale_factor = get_or(j, "kernel_scale_factor", c.kernel_scale_factor);
  c.k = get_or(j, "k", c.k);
  c.moons.sigma = get_or(j, "sigma", c.moons.sigma);
  c.moons.moon_tau = get_or(j, "moon_tau", c.moons.moon_tau);
  c.moons.profile_amp = get_or(j, "profile_amp", c.moons.profile_amp);
  return c;
}

InterplayConfig interplay_config(const json& j) {
  InterplayConfig c;
  c.d = get_or(j, "d", c.d);
  c.translate_width = get_or(j, "translate_width", c.translate_width);
  c.lambda_grid = get_or(j, "lambda_grid", c.lambda_grid);
  c.beta = get_or(j, "beta", c.beta);
  c.max_card = get_or(j, "max_card", c.max_card);
  return c;
}

SpectraTableConfig spectra_table_config(const json& j) {
  SpectraTableConfig c;
  c.d = get_or(j, "d", c.d);
  c.beta = get_or(j, "beta", c.beta);
  c.lambda = get_or(j, "lambda", c.lambda);
  c.bitflip_p = get_or(j, "bitflip_p", c.bitflip_p);
  c.crop_w = get_or(j, "crop_w", c.crop_w);
  c.flip_p = get_or(j, "flip_p", c.flip_p);
  c.translate_width = get_or(j, "translate_width", c.translate_width);
  return c;
}

SgdTrainConfig sgd_train_config(const json& j) {
  SgdTrainConfig c;
  c.n = get_or(j, "n", c.n);
  c.m = get_or(j, "m", c.m);
  c.noise = get_or(j, "noise", c.noise);
  c.landmarks = get_or(j, "landmarks", c.landmarks);
  c.kernel_scale = get_or(j, "kernel_scale", c.kernel_scale);
  c.sgd.beta = get_or(j, "beta", c.sgd.beta);
  c.sgd.lambda = get_or(j, "lambda", c.sgd.lambda);
  c.sgd.k = get_or(j, "k", c.sgd.k);
  c.sgd.steps = get_or(j, "steps", static_cast<long>(c.sgd.steps));
  c.sgd.m = get_or(j, "batch_views", c.sgd.m);
  c.sgd.step_scale = get_or(j, "step_scale", c.sgd.step_scale);
  c.sgd.avg_window = get_or(j, "avg_window", static_cast<long>(c.sgd.avg_window));
  c.sgd.trace_interval = get_or(j, "trace_interval", static_cast<long>(c.sgd.trace_interval));
  const std::string sched = get_or<std::string>(j, "schedule", "inv_sqrt");
  c.sgd.schedule = sched == "constant" ? SgdConfig::Schedule::Constant : SgdConfig::Schedule::InvSqrt;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kernel-regime self-supervised representation learning toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = static_cast<int>(std::thread::hardware_concurrency());

  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--out", out_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", seed, "master seed (required)");
  app.add_option("--threads", threads, "worker threads");

  auto* cmd_spectra = app.add_subcommand("spectra-table", "augmentation eigenvalue table");
  auto* cmd_grid = app.add_subcommand("rate-grid", "pretraining x downstream error grid");
  auto* cmd_sweep = app.add_subcommand("lambda-sweep", "regularization sweep on the sphere");
  auto* cmd_capacity = app.add_subcommand("capacity-demo", "collapse at negligible regularization");
  auto* cmd_interplay = app.add_subcommand("interplay", "invariance/complexity score report");
  auto* cmd_sgd = app.add_subcommand("sgd-train", "projected SGD pretraining run");
  auto* cmd_oracle = app.add_subcommand("oracle-check", "closed forms vs exhaustive operators");

  CLI11_PARSE(app, argc, argv);
  seed_set = seed_opt->count() > 0;

  try {
    const json cfg = load_config(config_path);
    if (!seed_set) {
      if (cfg.contains("seed")) seed = cfg.at("seed").get<std::uint64_t>();
      else throw input_error("a seed is required (--seed or \"seed\" in the config)");
    }
    threads = std::max(1, threads);
    const std::filesystem::path out(out_dir);

    if (cmd_spectra->parsed()) {
      run_spectra_table(spectra_table_config(section(cfg, "spectra_table")), out);
    } else if (cmd_grid->parsed()) {
      const RateGridResult r = run_rate_grid(rate_grid_config(section(cfg, "rate_grid")), seed, threads, out);
      std::cout << "downstream slope " << r.downstream_axis.slope << " [" << r.downstream_axis.ci_lo
                << ", " << r.downstream_axis.ci_hi << "]\n"
                << "pretraining slope " << r.pretraining_axis.slope << " ["
                << r.pretraining_axis.ci_lo << ", " << r.pretraining_axis.ci_hi << "]\n"
                << "saturation detected: " << (r.saturation_detected ? "yes" : "no") << "\n";
    } else if (cmd_sweep->parsed()) {
      const LambdaSweepResult r =
          run_lambda_sweep(lambda_sweep_config(section(cfg, "lambda_sweep")), seed, threads, out);
      std::cout << "invariant target best at small lambda: "
                << (r.invariant_best_at_small_lambda ? "yes" : "no") << "\n"
                << "low-degree target improves at large lambda: "
                << (r.low_degree_improves_at_large_lambda ? "yes" : "no") << "\n";
    } else if (cmd_capacity->parsed()) {
      const CapacityDemoResult r =
          run_capacity_demo(capacity_config(section(cfg, "capacity_demo")), seed, threads, out);
      std::cout << "top eigenfunction mass on one input: " << r.top_mass_fraction << "\n"
                << "moon sign agreement: " << r.sign_agreement << "\n";
    } else if (cmd_interplay->parsed()) {
      const InterplayResult r =
          run_interplay_report(interplay_config(section(cfg, "interplay")), seed, threads, out);
      std::cout << "crossovers at lambda = " << r.crossover_12 << " and " << r.crossover_23 << "\n";
    } else if (cmd_sgd->parsed()) {
      const SgdTrainResult r = run_sgd_train(sgd_train_config(section(cfg, "sgd_train")), seed, out);
      std::cout << "final loss " << r.final_loss << " (closed-form reference " << r.spectral_loss
                << ")\n";
    } else if (cmd_oracle->parsed()) {
      const OracleCheckResult r = run_oracle_check(out);
      std::cout << "max T error " << r.max_t_error << ", max K error " << r.max_k_error
                << ", commutation " << r.max_commute_error << "\n"
                << (r.all_ok() ? "all oracle checks passed" : "ORACLE CHECKS FAILED") << "\n";
      if (!r.all_ok()) return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
