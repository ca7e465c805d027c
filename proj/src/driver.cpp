#include "bilevel/driver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bilevel {

void OuterConfig::validate() const {
  auto fail = [](const char* field, const char* rule) {
    throw std::invalid_argument(std::string("outer config: ") + field + " " + rule);
  };
  if (!(mu0 > 0.0)) fail("mu0", "must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0)) fail("beta1", "must lie in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) fail("beta2", "must lie in (0, 1)");
  if (!(eps_hat0 >= 0.0)) fail("eps_hat0", "must be nonnegative");
  if (!(sbkkt_tol > 0.0)) fail("sbkkt_tol", "must be positive");
  if (!(mu_floor > 0.0)) fail("mu_floor", "must be positive");
  if (!(zero_tol > 0.0)) fail("zero_tol", "must be positive");
  if (max_outer < 1) fail("max_outer", "must be at least 1");
  if (!(lambda0 > 0.0)) fail("lambda0", "must be positive");
  if (!(eta0 > 0.0)) fail("eta0", "must be positive");
}

double SBKKTResiduals::max_block() const {
  return *std::max_element(block_norms.begin(), block_norms.end());
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::sbkkt_satisfied: return "sbkkt_satisfied";
    case Termination::mu_floor: return "mu_floor";
    case Termination::max_outer: return "max_outer";
  }
  return "unknown";
}

double sparsity_pct(const Eigen::VectorXd& w, double zero_tol) {
  if (w.size() == 0) return 0.0;
  const auto zeros = (w.array().abs() <= zero_tol).count();
  return 100.0 * static_cast<double>(zeros) / static_cast<double>(w.size());
}

SBKKTResiduals sb_kkt_residuals(const BilevelProblem& problem, const Iterate& it, double zero_tol) {
  const int n = problem.dim();
  const int r = problem.num_hyper();
  if (it.w.size() != n || it.zeta.size() != n || it.lambda.size() != r || it.eta.size() != r) {
    throw std::invalid_argument("sb_kkt_residuals: iterate dimensions do not match the problem");
  }
  if (!(zero_tol > 0.0)) throw std::invalid_argument("sb_kkt_residuals: zero_tol must be positive");

  const RegSpec& spec = problem.reg_spec();
  const double p = spec.p;
  const double lambda1 = it.lambda[0];
  const Eigen::VectorXd lambda_bar = it.lambda.tail(r - 1);
  const Eigen::VectorXd& w = it.w;

  // |w|^p, psi'(|w|^p), psi''(|w|^p).
  Eigen::VectorXd wp(n), dpsi(n), ddpsi(n);
  for (int j = 0; j < n; ++j) {
    wp[j] = std::pow(std::abs(w[j]), p);
    const auto d = spec.penalty.derivs(wp[j]);
    dpsi[j] = d.first;
    ddpsi[j] = d.second;
  }

  SBKKTResiduals out;
  const Eigen::VectorXd w2 = w.cwiseProduct(w);

  Eigen::MatrixXd H = w2.asDiagonal() * problem.lower_hess(w, lambda_bar);
  H.diagonal() += lambda1 * p * (p - 1.0) * wp.cwiseProduct(dpsi) +
                  lambda1 * p * p * wp.cwiseProduct(wp).cwiseProduct(ddpsi);
  out.r1 = w2.cwiseProduct(problem.upper_grad(w)) + H * it.zeta;

  out.r2 = w.cwiseProduct(problem.lower_grad(w, lambda_bar)) +
           p * lambda1 * wp.cwiseProduct(dpsi);

  double sum = 0.0;
  std::vector<double> active_zeta;
  for (int j = 0; j < n; ++j) {
    if (std::abs(w[j]) <= zero_tol) {
      out.active_set.push_back(j);
      active_zeta.push_back(it.zeta[j]);
      continue;
    }
    const double sgn = w[j] > 0.0 ? 1.0 : -1.0;
    sum += sgn * std::pow(std::abs(w[j]), p - 1.0) * dpsi[j] * it.zeta[j];
  }
  out.r3 = p * sum - it.eta[0];
  out.r4 = Eigen::Map<const Eigen::VectorXd>(active_zeta.data(),
                                             static_cast<Eigen::Index>(active_zeta.size()));

  out.r5.resize(r - 1);
  for (int j = 0; j < r - 1; ++j) {
    out.r5[j] = problem.reg_grad(j, w).dot(it.zeta) - it.eta[j + 1];
  }
  out.r6 = it.lambda.dot(it.eta);

  out.block_norms = {out.r1.norm(), out.r2.norm(), std::abs(out.r3),
                     out.r4.norm(), out.r5.norm(), std::abs(out.r6)};
  double sq = 0.0;
  for (double b : out.block_norms) sq += b * b;
  out.norm = std::sqrt(sq);
  return out;
}

OuterResult run_algorithm1(const BilevelProblem& problem, const OuterConfig& config,
                           const Eigen::VectorXd& initial_w) {
  config.validate();
  if (initial_w.size() != problem.dim()) {
    throw std::invalid_argument("run_algorithm1: initial point has the wrong dimension");
  }

  const int r = problem.num_hyper();
  Iterate it = Iterate::cold(initial_w, r, config.lambda0, config.eta0);
  InnerSolver solver(problem, config.inner);

  OuterResult out;
  double best_norm = std::numeric_limits<double>::infinity();
  // Closed-form geometric sequences, so mu_k is exactly mu0 * beta1^k.
  auto mu_at = [&](int k) { return config.mu0 * std::pow(config.beta1, k); };
  auto eps_at = [&](int k) { return config.eps_hat0 * std::pow(config.beta2, k); };

  for (int k = 0;; ++k) {
    const double mu = mu_at(k);
    const double eps_hat = eps_at(k);
    SolveResult inner = solver.solve(mu, eps_hat, it);
    if (inner.status == SolveStatus::non_finite) {
      throw NonFiniteError("inner solve at outer iteration " + std::to_string(k) + ": " +
                           inner.stats.diagnostic);
    }
    // Next solve starts from this one (the best iterate when the inner solve failed).
    it = std::move(inner.iterate);

    SBKKTResiduals sb = sb_kkt_residuals(problem, it, config.zero_tol);
    const double upper = problem.upper(it.w);
    out.history.push_back({k, mu, eps_hat, inner.stats.newton_iters, inner.status,
                           inner.residuals.norm, sb.norm, sparsity_pct(it.w, config.zero_tol),
                           upper, it.lambda[0]});

    const double mu_next = mu_at(k + 1);
    out.outer_iters = k + 1;
    out.mu_end = mu_next;

    if (sb.norm < best_norm) {
      best_norm = sb.norm;
      out.iterate = it;
      out.sbkkt = std::move(sb);
      out.upper_obj = upper;
    }
    if (best_norm < config.sbkkt_tol) {
      out.success = true;
      out.termination = Termination::sbkkt_satisfied;
      break;
    }
    if (mu_next <= config.mu_floor) {
      out.termination = Termination::mu_floor;
      break;
    }
    if (k + 1 >= config.max_outer) {
      out.termination = Termination::max_outer;
      break;
    }
  }
  return out;
}

}  // namespace bilevel
