// Command-line front end: `run` executes an experiment batch, `plot` samples
// the smoothing functions.
#include <cstdint>
#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "bilevel/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Smoothing method for sparse bilevel hyperparameter selection"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int jobs = -1;
  std::uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "run Algorithm 1 over a batch of synthetic instances");
  run->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "output directory (overrides the config)");
  auto* jobs_opt = run->add_option("--jobs", jobs, "worker threads, 0 = all")->check(CLI::NonNegativeNumber);
  auto* seed_opt = run->add_option("--seed", seed, "base seed (overrides the config)");

  double mu = 0.25;
  double p = 0.5;
  std::string plot_dir = "plots";
  bool no_svg = false;
  auto* plot = app.add_subcommand("plot", "write |x|, phi_i and their p-th powers on [-2, 2]");
  plot->add_option("--mu", mu, "smoothing parameter")->check(CLI::PositiveNumber);
  plot->add_option("--p", p, "exponent in (0, 1]")->check(CLI::Range(1e-12, 1.0));
  plot->add_option("--out", plot_dir, "output directory");
  plot->add_flag("--no-svg", no_svg, "CSV only");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      bilevel::ExperimentConfig config;
      if (!config_path.empty()) config = bilevel::load_config(config_path);
      if (!out_dir.empty()) config.output = out_dir;
      if (*jobs_opt) config.jobs = jobs;
      if (*seed_opt) config.seed = seed;
      const auto report = bilevel::run_experiment(config);
      bilevel::write_outputs(report, config.output);
      bilevel::write_results_csv(report, std::cout);
      std::cerr << "wrote " << config.output << "/results.csv and report.json\n";
    } else if (*plot) {
      for (const auto& path : bilevel::plot_smoothers(mu, p, plot_dir, !no_svg)) {
        std::cout << path.string() << '\n';
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
