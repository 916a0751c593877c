#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>

#include "loco/bench.h"
#include "loco/config.h"
#include "loco/model_io.h"
#include "loco/synth_env.h"

namespace {

loco::ExperimentConfig config_or_default(const std::string& path) {
  return path.empty() ? loco::ExperimentConfig{} : loco::load_experiment_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank contextual preference learning benchmark"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::string data_path;
  std::string model_path;
  std::string method = "prs";
  std::string in_path;
  int n_override = 0;
  std::uint64_t seed_override = 0;
  bool seed_given = false;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic comparison dataset");
  gen->add_option("-c,--config", config_path, "Experiment config (YAML)");
  gen->add_option("-n,--n", n_override, "Number of records (overrides env.n_total)");
  gen->add_option("-s,--seed", seed_override, "Seed (overrides env.seed)")->each([&](const std::string&) { seed_given = true; });
  gen->add_option("-o,--out", out_path, "Output dataset file")->required();

  auto* fit = app.add_subcommand("fit", "Fit one model from a dataset file");
  fit->add_option("-c,--config", config_path, "Experiment config (YAML)");
  fit->add_option("-d,--data", data_path, "Dataset file")->required();
  fit->add_option("-m,--method", method, "prs | mle_greedy | mle_pessimistic");
  fit->add_option("-o,--out", out_path, "Output model file (JSON)")->required();

  auto* eval = app.add_subcommand("eval", "Sub-optimality of a fitted model against the true parameter");
  eval->add_option("-c,--config", config_path, "Experiment config (YAML)");
  eval->add_option("-M,--model", model_path, "Model file (JSON)")->required();
  eval->add_option("-s,--seed", seed_override, "Evaluation sample seed")->each([&](const std::string&) { seed_given = true; });

  auto* sweep = app.add_subcommand("sweep", "Run the full methods x N x seeds experiment");
  sweep->add_option("-c,--config", config_path, "Experiment config (YAML)")->required();
  sweep->add_option("-o,--out", out_path, "Results CSV (overrides experiment.output)");

  auto* report = app.add_subcommand("report", "Aggregate a results CSV per method and N");
  report->add_option("-i,--in", in_path, "Results CSV")->required();
  report->add_option("-o,--out", out_path, "Aggregate CSV (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      auto cfg = config_or_default(config_path);
      loco::EnvConfig env = cfg.env;
      if (n_override > 0) {
        env.n_total = n_override;
        env.n_subspace = static_cast<int>(n_override * cfg.subspace_fraction);
      }
      if (seed_given) env.seed = seed_override;
      const auto theta_star = loco::make_true_theta(env);
      loco::save_dataset(out_path, loco::generate_dataset(env, theta_star));
      std::cout << "wrote " << env.n_total << " records to " << out_path << '\n';
    } else if (fit->parsed()) {
      auto cfg = config_or_default(config_path);
      const auto data = loco::load_dataset(data_path);
      const auto fitted = loco::fit_method(loco::parse_method(method), data, cfg);
      loco::save_model(out_path, fitted);
      std::cout << "method " << method << " fitted on " << data.records.size() << " records";
      if (fitted.cs) std::cout << ", radius " << fitted.cs->radius() << ", dim " << fitted.cs->dim();
      std::cout << "\nwrote " << out_path << '\n';
    } else if (eval->parsed()) {
      auto cfg = config_or_default(config_path);
      const auto model = loco::load_model(model_path);
      const auto theta_star = loco::make_true_theta(cfg.env);
      loco::Rng rng(loco::mix_seed(seed_given ? seed_override : cfg.env.seed, 0xE7A1));
      const auto sample = loco::sample_eval_set(cfg.eval, cfg.env.d_x, cfg.env.d_s, rng);
      const double j_star = loco::optimal_policy_value(theta_star, sample, cfg.env.d_a, cfg.eval.mode);
      const auto v = loco::policy_value(model.policy(), theta_star, sample, cfg.env.d_a, cfg.eval.mode);
      std::cout << std::setprecision(10) << "J(pi*)  " << j_star << "\nJ(pi)   " << v.value
                << "\nsubopt  " << v.subopt << " (stderr " << v.subopt_stderr << ")\n"
                << "est_error_frob " << loco::estimation_error(model.theta_hat, theta_star) << '\n';
    } else if (sweep->parsed()) {
      auto cfg = loco::load_experiment_config(config_path);
      if (!out_path.empty()) cfg.output_path = out_path;
      const auto rows = loco::run_experiment(cfg);
      loco::write_report(std::cout, loco::aggregate(rows));
    } else if (report->parsed()) {
      const auto agg = loco::aggregate(loco::load_results(in_path));
      if (out_path.empty()) {
        loco::write_report(std::cout, agg);
      } else {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot open " + out_path);
        loco::write_report(out, agg);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
