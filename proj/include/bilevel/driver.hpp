// Outer smoothing loop and the scaled bilevel KKT (SB-KKT) certificate.
#pragma once

#include <array>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "bilevel/inner_solver.hpp"
#include "bilevel/problem.hpp"

namespace bilevel {

struct OuterConfig {
  double mu0 = 1.0;
  double beta1 = 0.8;
  double eps_hat0 = 1e-1;
  double beta2 = 0.8;
  double sbkkt_tol = 1e-2;
  double mu_floor = 1e-8;
  double zero_tol = 1e-5;
  int max_outer = 200;
  /// Starting hyperparameters and bound multipliers on the first inner solve.
  double lambda0 = 1.0;
  double eta0 = 0.1;
  InnerOptions inner;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Residuals of the SB-KKT system at (w, lambda, zeta, eta), with
/// W = diag(w) and I(w) = {j : |w_j| <= zero_tol}:
///   r1 = W^2 grad f + H(w, lambda) zeta
///   r2 = W grad_w G + p lambda_1 |W|^p psi'(|w|^p)
///   r3 = p sum_{j not in I} sgn(w_j) |w_j|^{p-1} psi'(|w_j|^p) zeta_j - eta_1
///   r4 = zeta_j, j in I
///   r5 = grad R_j^T zeta - eta_j, j = 2..r
///   r6 = lambda^T eta
struct SBKKTResiduals {
  Eigen::VectorXd r1;
  Eigen::VectorXd r2;
  double r3 = 0.0;
  Eigen::VectorXd r4;
  Eigen::VectorXd r5;
  double r6 = 0.0;
  std::vector<int> active_set;
  /// Euclidean norm of each block r1..r6.
  std::array<double, 6> block_norms{};
  /// Norm of the concatenation of all blocks.
  double norm = 0.0;

  double max_block() const;
};

SBKKTResiduals sb_kkt_residuals(const BilevelProblem& problem, const Iterate& it, double zero_tol);

/// Percentage of components with |w_j| <= zero_tol.
double sparsity_pct(const Eigen::VectorXd& w, double zero_tol);

enum class Termination { sbkkt_satisfied, mu_floor, max_outer };
std::string_view to_string(Termination t);

struct OuterRecord {
  int k;
  double mu;
  double eps_hat;
  int inner_iters;
  SolveStatus inner_status;
  double inner_residual;
  double sbkkt;
  double sparsity_pct;
  double upper_obj;
  double lambda1;
};

struct OuterResult {
  /// The iterate with the smallest SB-KKT norm seen.
  Iterate iterate;
  SBKKTResiduals sbkkt;
  std::vector<OuterRecord> history;
  bool success = false;
  Termination termination = Termination::max_outer;
  /// mu_{k+1} at termination.
  double mu_end = 0.0;
  /// Number of inner solves performed.
  int outer_iters = 0;
  double upper_obj = 0.0;
};

/// Error raised when an inner solve hits NaN/Inf.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs the smoothing loop: solve for an eps_hat_k-approximate KKT point at
/// mu_k (warm-started from the previous one), then mu_{k+1} = beta1 mu_k and
/// eps_hat_{k+1} = beta2 eps_hat_k, until the SB-KKT norm drops below
/// sbkkt_tol (success), mu_{k+1} <= mu_floor, or max_outer solves.
OuterResult run_algorithm1(const BilevelProblem& problem, const OuterConfig& config,
                           const Eigen::VectorXd& initial_w);

}  // namespace bilevel
