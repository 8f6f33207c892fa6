// Command-line driver for the change-surface Gaussian process library.
//
// Exit codes: 0 success, 1 pipeline error, 2 usage error.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "csgp/runner.hpp"

namespace {

void add_common_flags(CLI::App* cmd, csgp::RunConfig& cfg,
                      std::string& config_path) {
  cmd->add_option("--config", config_path,
                  "key=value config file ('#' comments); flags override");
  cmd->add_option("--seed", cfg.seed, "root random seed");
  cmd->add_option("--out", cfg.out_dir, "output directory");
  cmd->add_option("--r", cfg.r, "number of regimes");
  cmd->add_option("--q", cfg.q, "spectral mixture components per dimension");
  cmd->add_option("--m", cfg.m, "RKS features per weighting function");
  cmd->add_option("--strategy", cfg.strategy,
                  "log-det strategy: exact | middle | greedy:S");
  cmd->add_option("--dense-cap", cfg.dense_cap, "dense-mode size cap");
  cmd->add_option("--test-frac", cfg.test_frac, "held-out fraction");
  cmd->add_flag("--sort-line", cfg.sort_line,
                "sort responses before the line transform (literal variant)");
  cmd->add_flag("--with-var", cfg.with_var, "emit predictive variances");
  cmd->add_option("--time-axis", cfg.time_axis,
                  "axis index for midpoint/slope summaries");
  cmd->add_option("--restarts", cfg.restarts, "random restarts");
  cmd->add_option("--max-iters", cfg.max_iters, "optimizer iteration cap");
  cmd->add_option("--init-g", cfg.init_g, "candidate weight draws");
  cmd->add_option("--init-h", cfg.init_h, "kernel draws per candidate");
  cmd->add_option("--init-partial", cfg.init_partial,
                  "abbreviated optimization steps");
  cmd->add_option("--init-subsample", cfg.init_subsample,
                  "points used during candidate search (0 = all)");
  cmd->add_option("--opt-subsample", cfg.opt_subsample,
                  "points used in the final optimization (0 = all)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scalable Gaussian process change-surface modeling"};
  app.require_subcommand(1);

  csgp::RunConfig cfg;
  std::string config_path;

  // The config file is applied before flag parsing so flags override it.
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      try {
        csgp::apply_config_file(cfg, argv[i + 1]);
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
      }
      break;
    }
  }

  auto* synthetic = app.add_subcommand(
      "synthetic", "Two-regime synthetic-grid experiment with restarts");
  add_common_flags(synthetic, cfg, config_path);
  synthetic->add_option("--n1", cfg.n1, "grid points along axis 1");
  synthetic->add_option("--n2", cfg.n2, "grid points along axis 2");

  auto* coal = app.add_subcommand(
      "coal", "Yearly coal accident change-region experiment");
  add_common_flags(coal, cfg, config_path);
  coal->add_option("--dataset", cfg.dataset, "coal CSV (year,count)");

  auto* bench = app.add_subcommand(
      "benchmark-logdet", "Log-determinant bound ratio/timing sweep");
  add_common_flags(bench, cfg, config_path);

  auto* fit_cmd =
      app.add_subcommand("fit", "Fit a model to a complete-grid CSV");
  add_common_flags(fit_cmd, cfg, config_path);
  auto* fit_dataset =
      fit_cmd->add_option("--dataset", cfg.dataset, "input CSV");

  auto* predict_cmd = app.add_subcommand(
      "predict", "Predict with a serialized model over a dataset");
  add_common_flags(predict_cmd, cfg, config_path);
  auto* predict_dataset =
      predict_cmd->add_option("--dataset", cfg.dataset, "input CSV");
  auto* predict_model =
      predict_cmd->add_option("--model", cfg.model_path, "model JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  // Required inputs may come from either a flag or the config file.
  if (fit_cmd->parsed() && !fit_dataset->count() && cfg.dataset.empty()) {
    std::cerr << "error: fit requires --dataset (flag or config file)\n";
    return 2;
  }
  if (predict_cmd->parsed()) {
    if (!predict_dataset->count() && cfg.dataset.empty()) {
      std::cerr << "error: predict requires --dataset\n";
      return 2;
    }
    if (!predict_model->count() && cfg.model_path.empty()) {
      std::cerr << "error: predict requires --model\n";
      return 2;
    }
  }

  try {
    if (synthetic->parsed()) {
      const auto outcome = csgp::run_synthetic(cfg);
      std::printf("change-surface mean NMSE: %.6g\n", outcome.cs_mean);
      std::printf("spectral-mixture mean NMSE: %.6g\n", outcome.sm_mean);
      std::printf("surface accuracy (best restart): %.4f\n",
                  outcome.surface_accuracy);
    } else if (coal->parsed()) {
      const auto outcome = csgp::run_coal(cfg);
      if (outcome.crossed)
        std::printf("midpoint year: %.2f\n", outcome.midpoint);
      else
        std::printf("midpoint year: none (no 0.5 crossing)\n");
      std::printf("0.1 -> 0.9 transition: %.2f years\n", outcome.duration);
    } else if (bench->parsed()) {
      const auto rows = csgp::run_benchmark_logdet(cfg);
      std::printf("wrote %zu benchmark rows to %s/logdet_benchmark.csv\n",
                  rows.size(), cfg.out_dir.c_str());
    } else if (fit_cmd->parsed()) {
      const auto res = csgp::run_fit(cfg);
      std::printf("final objective: %.6g (%s)\n",
                  res.report.final_objective, cfg.strategy.c_str());
      std::printf("model written to %s/model.json\n", cfg.out_dir.c_str());
    } else if (predict_cmd->parsed()) {
      const auto outcome = csgp::run_predict(cfg);
      if (outcome.nmse_value >= 0.0)
        std::printf("held-out NMSE: %.6g\n", outcome.nmse_value);
      std::printf("predictions written to %s/predictions.csv\n",
                  cfg.out_dir.c_str());
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
