// Batch experiments over synthetic elastic-net instances, plus the curve
// sampler used for smoothing-function plots.
//
// Config files are plain `key = value` lines; `#` starts a comment. Keys are
// the ExperimentConfig field names below (outer-loop fields are flattened,
// e.g. `mu0 = 1`). Unknown keys are rejected by name.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "bilevel/driver.hpp"
#include "bilevel/kernels.hpp"
#include "bilevel/penalties.hpp"

namespace bilevel {

struct ExperimentConfig {
  int n = 50;
  int m1 = 100;
  int m2 = 100;
  int num_instances = 5;
  double p = 0.5;
  PenaltyId penalty = PenaltyId::psi1;
  double a = 1.0;
  std::vector<KernelId> kernels = {KernelId::rho1, KernelId::rho2, KernelId::rho3,
                                   KernelId::rho4, KernelId::rho6};
  std::uint64_t seed = 1;
  double noise = 0.01;
  bool ridge = true;
  double w0 = 100.0;  // every component of the first starting point
  OuterConfig outer;
  std::string output = "out";
  int jobs = 0;        // 0: OpenMP default
  bool timing = true;  // false writes 0 for wall time so outputs are reproducible byte for byte

  void validate() const;
};

/// Applies one `key = value` setting. Throws std::invalid_argument naming the
/// key when it is unknown or its value does not parse.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::filesystem::path& path);

struct RunRecord {
  KernelId kernel = KernelId::rho1;
  int instance = 0;
  std::uint64_t seed = 0;
  double obj = 0.0;
  double sbkkt = 0.0;
  double mu_end = 0.0;
  double sparsity_pct = 0.0;
  double time_s = 0.0;
  int outer_iters = 0;
  bool success = false;
  Termination termination = Termination::max_outer;
  std::vector<double> lambda;
  std::vector<OuterRecord> history;
  std::string error;  // set when the run aborted
};

struct KernelSummary {
  KernelId kernel = KernelId::rho1;
  int runs = 0;
  int successes = 0;
  double success_pct = 0.0;
  // Means over successful runs (NaN when there are none).
  double obj = 0.0;
  double sbkkt = 0.0;
  double mu_end = 0.0;
  double sparsity = 0.0;
  double time_s = 0.0;
  double ite = 0.0;
  // Medians over the same runs.
  double obj_median = 0.0;
  double sbkkt_median = 0.0;
  double mu_end_median = 0.0;
  double sparsity_median = 0.0;
  double time_median = 0.0;
  double ite_median = 0.0;
};

struct RunReport {
  ExperimentConfig config;
  std::vector<RunRecord> runs;  // kernel-major, then instance
  std::vector<KernelSummary> summaries;
};

/// Runs every (kernel, instance) pair. Instance i is generated from
/// derive_seed(seed, i) and shared by all kernels; pairs run in parallel with
/// config.jobs threads and results do not depend on the thread count.
RunReport run_experiment(const ExperimentConfig& config);

KernelSummary summarize(KernelId kernel, const std::vector<RunRecord>& runs);

/// Columns: i, obj, sbkkt, mu_end, sparsity, ave_time_s, ite, success_pct.
void write_results_csv(const RunReport& report, std::ostream& os);
std::string results_csv(const RunReport& report);
void write_report_json(const RunReport& report, std::ostream& os);

/// Writes results.csv and report.json under `dir` (created if needed).
void write_outputs(const RunReport& report, const std::filesystem::path& dir);

struct SmootherCurves {
  double mu = 0.0;
  double p = 1.0;
  std::vector<double> x;
  std::vector<double> abs;                   // |x|
  std::vector<std::vector<double>> phi;      // phi_1..phi_6
  std::vector<double> abs_p;                 // |x|^p
  std::vector<std::vector<double>> phi_p;    // phi_i^p
};

/// 401 points on [-2, 2]. Throws std::invalid_argument for mu <= 0.
SmootherCurves sample_smoothers(double mu, double p);

/// Writes curves_phi.csv and curves_phi_p.csv (and SVG renderings when
/// `svg` is set) under `dir`; returns the paths written.
std::vector<std::filesystem::path> plot_smoothers(double mu, double p,
                                                  const std::filesystem::path& dir,
                                                  bool svg = true);

}  // namespace bilevel
