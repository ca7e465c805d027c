#include <cmath>
#include <stdexcept>
#include <string>

#include <gtest/gtest.h>

#include "bilevel/driver.hpp"
#include "bilevel/rng.hpp"
#include "oracles.hpp"

using namespace bilevel;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd scalar(double v) { return MatrixXd::Constant(1, 1, v); }
VectorXd vec1(double v) { return VectorXd::Constant(1, v); }
VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

// f = (w - 1)^2 / 2, g = (w - 2)^2 / 2, R2 = w^2, R1 = |w|^(1/2).
ElasticNetProblem one_dim(KernelId k = KernelId::rho6) {
  return make_elastic_net(scalar(1), vec1(1), scalar(1), vec1(2),
                          RegSpec(0.5, Penalty(PenaltyId::psi1), make_smooth_abs(k)));
}

}  // namespace

TEST(SBKKT, OriginWithZeroMultipliers) {
  const auto inst = gen_synthetic(5, 6, 6, 0.01, 1);
  auto prob = make_elastic_net(inst, RegSpec(0.5, Penalty(PenaltyId::psi1), make_smooth_abs(KernelId::rho6)));
  Iterate it{VectorXd::Zero(5), vec2(0.4, 0.0), VectorXd::Zero(5), vec2(0.3, 0.0)};
  const auto sb = sb_kkt_residuals(prob, it, 1e-5);
  EXPECT_EQ(sb.r1.norm(), 0.0);
  EXPECT_EQ(sb.r2.norm(), 0.0);
  EXPECT_EQ(sb.r4.norm(), 0.0);
  EXPECT_EQ(sb.r3, -0.3);
  EXPECT_EQ(sb.active_set.size(), 5u);
}

TEST(SBKKT, HandConstructedPoint) {
  // At w = 1 with lambda = (2, 0): W grad G + p lambda_1 |w|^p = -1 + 1 = 0,
  // grad f = 0 and H = 1 - 1/2 so zeta = 0, which forces eta = 0.
  auto prob = one_dim();
  Iterate it{vec1(1.0), vec2(2.0, 0.0), vec1(0.0), vec2(0.0, 0.0)};
  const auto sb = sb_kkt_residuals(prob, it, 1e-5);
  EXPECT_LE(sb.norm, 1e-12);
  EXPECT_TRUE(sb.active_set.empty());
}

TEST(SBKKT, ConstantUpperObjective) {
  // f = 0 (A1 = 0, b1 = 0), zeta = 0, eta = 0 and w solving the scaled
  // lower-level condition at lambda = (2, 0).
  auto prob = make_elastic_net(scalar(0), vec1(0), scalar(1), vec1(2),
                               RegSpec(0.5, Penalty(PenaltyId::psi1), make_smooth_abs(KernelId::rho2)));
  Iterate it{vec1(1.0), vec2(2.0, 0.0), vec1(0.0), vec2(0.0, 0.0)};
  EXPECT_EQ(sb_kkt_residuals(prob, it, 1e-5).norm, 0.0);
}

TEST(SBKKT, ActiveSetFollowsZeroTolerance) {
  const auto inst = gen_synthetic(4, 6, 6, 0.01, 2);
  auto prob = make_elastic_net(inst, RegSpec(0.5, Penalty(PenaltyId::psi1), make_smooth_abs(KernelId::rho4)));
  VectorXd w(4);
  w << 1e-5, -2e-5, 0.0, 3.0;
  VectorXd zeta(4);
  zeta << 0.1, 0.2, 0.3, 0.4;
  Iterate it{w, vec2(0.5, 0.5), zeta, vec2(0.1, 0.1)};
  const auto sb = sb_kkt_residuals(prob, it, 1e-5);
  ASSERT_EQ(sb.active_set, (std::vector<int>{0, 2}));
  EXPECT_EQ(sb.r4[0], 0.1);
  EXPECT_EQ(sb.r4[1], 0.3);
  EXPECT_DOUBLE_EQ(sb.r6, 0.1);
  EXPECT_DOUBLE_EQ(sparsity_pct(w, 1e-5), 50.0);
}

TEST(SBKKT, BlockNormsAggregate) {
  const auto inst = gen_synthetic(6, 8, 8, 0.01, 3);
  auto prob = make_elastic_net(inst, RegSpec(0.5, Penalty(PenaltyId::psi3), make_smooth_abs(KernelId::rho1)));
  Iterate it{VectorXd::LinSpaced(6, -1, 1), vec2(0.2, 0.7), VectorXd::LinSpaced(6, 1, 2), vec2(0.3, 0.1)};
  const auto sb = sb_kkt_residuals(prob, it, 1e-5);
  double sq = 0;
  for (double b : sb.block_norms) sq += b * b;
  EXPECT_NEAR(sb.norm, std::sqrt(sq), 1e-14 * sb.norm);
  EXPECT_LE(sb.max_block(), sb.norm);
}

TEST(Algorithm1, MatchesOneDimensionalGridOracle) {
  const auto grid = oracle::bilevel_1d_grid();
  auto prob = one_dim();
  const auto res = run_algorithm1(prob, OuterConfig{}, vec1(100.0));
  EXPECT_TRUE(res.success);
  EXPECT_NEAR(prob.upper(res.iterate.w), grid.f, 1e-2);
  EXPECT_NEAR(res.iterate.w[0], grid.w, 1e-1);
}

TEST(Algorithm1, GeometricSchedules) {
  const auto inst = gen_synthetic(8, 16, 16, 0.01, 4);
  auto prob = make_elastic_net(inst, RegSpec(0.5, Penalty(PenaltyId::psi1), make_smooth_abs(KernelId::rho6)));
  OuterConfig cfg;
  cfg.sbkkt_tol = 1e-300;  // never satisfied
  cfg.max_outer = 12;
  const auto res = run_algorithm1(prob, cfg, VectorXd::Constant(8, 100.0));
  ASSERT_EQ(res.history.size(), 12u);
  EXPECT_EQ(res.termination, Termination::max_outer);
  EXPECT_FALSE(res.success);
  for (std::size_t k = 0; k < res.history.size(); ++k) {
    EXPECT_EQ(res.history[k].mu, std::pow(0.8, static_cast<double>(k)));
    EXPECT_EQ(res.history[k].eps_hat, 0.1 * std::pow(0.8, static_cast<double>(k)));
    if (k > 0) EXPECT_LT(res.history[k].mu, res.history[k - 1].mu);
  }
  EXPECT_EQ(res.mu_end, std::pow(0.8, 12.0));
  // Best iterate, not the last one.
  double best = res.history.front().sbkkt;
  for (const auto& h : res.history) best = std::min(best, h.sbkkt);
  EXPECT_EQ(res.sbkkt.norm, best);
}

TEST(Algorithm1, MuFloorTermination) {
  const auto inst = gen_synthetic(5, 10, 10, 0.01, 5);
  auto prob = make_elastic_net(inst, RegSpec(0.5, Penalty(PenaltyId::psi1), make_smooth_abs(KernelId::rho4)));
  OuterConfig cfg;
  cfg.sbkkt_tol = 1e-300;
  cfg.mu_floor = 0.5;
  const auto res = run_algorithm1(prob, cfg, VectorXd::Constant(5, 100.0));
  EXPECT_EQ(res.termination, Termination::mu_floor);
  EXPECT_LE(res.mu_end, 0.5);
  EXPECT_EQ(res.outer_iters, 4);  // 0.8^4 = 0.4096
}

TEST(Algorithm1, SuccessIsCertifiedIndependently) {
  for (int i = 0; i < 3; ++i) {
    const auto inst = gen_synthetic(20, 40, 40, 0.01, derive_seed(31, i));
    for (double p : {0.5, 1.0}) {
      auto prob = make_elastic_net(inst, RegSpec(p, Penalty(PenaltyId::psi1), make_smooth_abs(KernelId::rho4)));
      const auto res = run_algorithm1(prob, OuterConfig{}, VectorXd::Constant(20, 100.0));
      if (!res.success) continue;
      EXPECT_LT(sb_kkt_residuals(prob, res.iterate, 1e-5).norm, 1e-2);
      EXPECT_EQ(res.termination, Termination::sbkkt_satisfied);
      EXPECT_GE(res.iterate.lambda.minCoeff(), 0.0);
    }
  }
}

TEST(Algorithm1, WarmStartsReuseThePreviousPoint) {
  const auto inst = gen_synthetic(10, 20, 20, 0.01, 6);
  auto prob = make_elastic_net(inst, RegSpec(1.0, Penalty(PenaltyId::psi1), make_smooth_abs(KernelId::rho6)));
  const OuterConfig cfg;
  const VectorXd w0 = VectorXd::Constant(10, 100.0);
  const auto res = run_algorithm1(prob, cfg, w0);
  ASSERT_GE(res.history.size(), 3u);
  // Re-solve each subproblem from the cold start instead.
  int warm = 0;
  int cold = 0;
  for (std::size_t k = 1; k < res.history.size(); ++k) {
    const auto& h = res.history[k];
    warm += h.inner_iters;
    const auto c = solve_approx_kkt(prob, h.mu, h.eps_hat, Iterate::cold(w0, 2, cfg.lambda0, cfg.eta0), cfg.inner);
    cold += c.stats.newton_iters;
  }
  EXPECT_LT(warm, cold);
}

TEST(OuterConfig, ValidationNamesTheField) {
  OuterConfig cfg;
  cfg.beta1 = 1.0;
  try {
    cfg.validate();
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("beta1"), std::string::npos);
  }
  cfg = OuterConfig{};
  cfg.beta2 = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = OuterConfig{};
  cfg.zero_tol = -1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  EXPECT_NO_THROW(OuterConfig{}.validate());
}
