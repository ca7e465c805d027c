#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <gtest/gtest.h>

#include "bilevel/harness.hpp"
#include "json.hpp"

using namespace bilevel;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.n = 8;
  c.m1 = c.m2 = 16;
  c.num_instances = 2;
  c.kernels = {KernelId::rho1, KernelId::rho6};
  c.timing = false;
  return c;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("bilevel_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, ParsesKeysAndComments) {
  std::istringstream is(
      "# desk run\n"
      "n = 20\n"
      "m1=30   # rows\n"
      "m2 = 40\n"
      "num_instances = 3\n"
      "p = 1\n"
      "penalty = psi3\n"
      "a = 2.5\n"
      "kernels = 1, phi4, rho6\n"
      "seed = 18446744073709551615\n"
      "beta1 = 0.5\n"
      "sbkkt_tol = 1e-3\n"
      "timing = off\n"
      "jobs = 2\n"
      "output = somewhere\n");
  const auto c = parse_config(is);
  EXPECT_EQ(c.n, 20);
  EXPECT_EQ(c.m1, 30);
  EXPECT_EQ(c.m2, 40);
  EXPECT_EQ(c.num_instances, 3);
  EXPECT_EQ(c.p, 1.0);
  EXPECT_EQ(c.penalty, PenaltyId::psi3);
  EXPECT_EQ(c.a, 2.5);
  EXPECT_EQ(c.kernels, (std::vector<KernelId>{KernelId::rho1, KernelId::rho4, KernelId::rho6}));
  EXPECT_EQ(c.seed, 18446744073709551615ULL);
  EXPECT_EQ(c.outer.beta1, 0.5);
  EXPECT_EQ(c.outer.sbkkt_tol, 1e-3);
  EXPECT_FALSE(c.timing);
  EXPECT_EQ(c.jobs, 2);
  EXPECT_EQ(c.output, "somewhere");
}

TEST(Config, DefaultsMatchDeskExperiment) {
  const ExperimentConfig c;
  EXPECT_EQ(c.kernels, (std::vector<KernelId>{KernelId::rho1, KernelId::rho2, KernelId::rho3,
                                              KernelId::rho4, KernelId::rho6}));
  EXPECT_EQ(c.penalty, PenaltyId::psi1);
  EXPECT_EQ(c.outer.mu0, 1.0);
  EXPECT_EQ(c.outer.beta1, 0.8);
  EXPECT_EQ(c.outer.sbkkt_tol, 1e-2);
  EXPECT_EQ(c.outer.mu_floor, 1e-8);
  EXPECT_EQ(c.outer.zero_tol, 1e-5);
}

TEST(Config, UnknownKeyIsNamed) {
  std::istringstream is("n = 5\nbogus_key = 3\n");
  try {
    parse_config(is);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("bogus_key"), std::string::npos);
  }
}

TEST(Config, BadValuesAreNamed) {
  for (const char* text : {"n = five\n", "kernels = rho9\n", "p = 1.5\n", "kernels =\n",
                           "num_instances = 0\n", "timing = sometimes\n", "penalty = psi0\n"}) {
    std::istringstream is(text);
    EXPECT_THROW(parse_config(is), std::invalid_argument) << text;
  }
  std::istringstream missing_eq("n 5\n");
  EXPECT_THROW(parse_config(missing_eq), std::invalid_argument);
}

TEST(Experiment, CsvLayoutAndSummaries) {
  const auto report = run_experiment(small_config());
  ASSERT_EQ(report.runs.size(), 4u);
  ASSERT_EQ(report.summaries.size(), 2u);
  const std::string csv = results_csv(report);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "i,obj,sbkkt,mu_end,sparsity,ave_time_s,ite,success_pct");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  // Instances are shared across kernels.
  EXPECT_EQ(report.runs[0].seed, report.runs[2].seed);
  EXPECT_NE(report.runs[0].seed, report.runs[1].seed);
  for (const auto& r : report.runs) EXPECT_EQ(r.time_s, 0.0);
}

TEST(Experiment, AveragesUseOnlySuccessfulRuns) {
  std::vector<RunRecord> runs(3);
  for (auto& r : runs) r.kernel = KernelId::rho4;
  runs[0].success = true;
  runs[0].obj = 1.0;
  runs[0].outer_iters = 10;
  runs[1].success = true;
  runs[1].obj = 3.0;
  runs[1].outer_iters = 20;
  runs[2].success = false;
  runs[2].obj = 1000.0;
  runs[2].outer_iters = 99;
  const auto s = summarize(KernelId::rho4, runs);
  EXPECT_EQ(s.runs, 3);
  EXPECT_EQ(s.successes, 2);
  EXPECT_NEAR(s.success_pct, 200.0 / 3.0, 1e-12);
  EXPECT_EQ(s.obj, 2.0);
  EXPECT_EQ(s.ite, 15.0);
  EXPECT_EQ(s.obj_median, 2.0);

  const auto none = summarize(KernelId::rho1, runs);
  EXPECT_EQ(none.runs, 0);
  EXPECT_TRUE(std::isnan(none.obj));
}

TEST(Experiment, DeterministicAcrossRunsAndThreadCounts) {
  auto c = small_config();
  c.num_instances = 1;
  const std::string a = results_csv(run_experiment(c));
  const std::string b = results_csv(run_experiment(c));
  EXPECT_EQ(a, b);
  c.jobs = 1;
  const std::string serial = results_csv(run_experiment(c));
  EXPECT_EQ(a, serial);
  c.seed = 2;
  EXPECT_NE(a, results_csv(run_experiment(c)));
}

TEST(Experiment, WritesCsvAndJson) {
  const auto dir = temp_dir("outputs");
  auto c = small_config();
  c.num_instances = 1;
  const auto report = run_experiment(c);
  write_outputs(report, dir);
  EXPECT_EQ(slurp(dir / "results.csv"), results_csv(report));
  const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
  EXPECT_EQ(j["runs"].size(), 2u);
  EXPECT_EQ(j["summaries"].size(), 2u);
  EXPECT_FALSE(j["runs"][0]["history"].empty());
  EXPECT_TRUE(j["summaries"][0].contains("median"));
  EXPECT_EQ(j["config"]["n"], 8);
  std::filesystem::remove_all(dir);
}

TEST(Experiment, DeskScaleSparsityContrast) {
  ExperimentConfig c;
  c.kernels = {KernelId::rho6};
  c.timing = false;
  c.p = 0.5;
  const auto half = run_experiment(c).summaries.at(0);
  c.p = 1.0;
  const auto one = run_experiment(c).summaries.at(0);
  EXPECT_GT(half.sparsity, one.sparsity);
  EXPECT_GT(half.sparsity, 30.0);
}

TEST(Plot, CurvesOrderingAndKnots) {
  const auto c = sample_smoothers(0.25, 0.5);
  ASSERT_EQ(c.x.size(), 401u);
  EXPECT_EQ(c.x.front(), -2.0);
  EXPECT_EQ(c.x.back(), 2.0);
  for (std::size_t k = 0; k < c.x.size(); ++k) {
    EXPECT_LE(c.abs[k], c.phi[0][k]);
    for (int i = 0; i + 1 < 6; ++i) EXPECT_LE(c.phi[i][k], c.phi[i + 1][k]) << "x=" << c.x[k];
  }
  for (std::size_t k : {std::size_t{0}, c.x.size() - 1}) {
    for (int i = 0; i < 3; ++i) EXPECT_EQ(c.phi[i][k], 2.0);
  }
}

TEST(Plot, UnitExponentReproducesPhi) {
  const auto c = sample_smoothers(0.3, 1.0);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(c.phi_p[i], c.phi[i]);
  EXPECT_EQ(c.abs_p, c.abs);
  EXPECT_THROW(sample_smoothers(0.0, 0.5), std::invalid_argument);
}

TEST(Plot, WritesFiles) {
  const auto dir = temp_dir("plot");
  const auto files = plot_smoothers(0.25, 0.5, dir);
  ASSERT_EQ(files.size(), 4u);
  for (const auto& f : files) EXPECT_TRUE(std::filesystem::exists(f)) << f;
  const std::string csv = slurp(dir / "curves_phi.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "x,abs,phi1,phi2,phi3,phi4,phi5,phi6");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 402);
  std::filesystem::remove_all(dir);
}
