// Approximate KKT points of the smoothed one-level problem
//
//   min_{w, lambda}  f(w)
//   s.t.  c(w, lambda) := grad_w G(w, lambda_bar) + lambda_1 grad phi_mu(w) = 0,
//         lambda >= 0,
//
// computed by a primal-dual log-barrier Newton method on (w, lambda) with
// equality multipliers zeta and bound multipliers eta.
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "bilevel/problem.hpp"

namespace bilevel {

struct Iterate {
  Eigen::VectorXd w;
  Eigen::VectorXd lambda;
  Eigen::VectorXd zeta;
  Eigen::VectorXd eta;

  /// w given, lambda = lambda0 * 1, zeta = 0, eta = eta0 * 1.
  static Iterate cold(const Eigen::VectorXd& w, int r, double lambda0 = 1.0, double eta0 = 0.1);
};

/// Residual blocks of the approximate KKT system:
///   eps1 = grad f + (hess_ww G + lambda_1 hess phi_mu) zeta
///   eps2 = grad phi_mu^T zeta - eta_1
///   eps3 = grad R_j^T zeta - eta_j           (j = 2..r)
///   eps4 = grad_w G + lambda_1 grad phi_mu
///   eps5 = lambda^T eta
struct KKTResiduals {
  Eigen::VectorXd eps1;
  double eps2 = 0.0;
  Eigen::VectorXd eps3;
  Eigen::VectorXd eps4;
  double eps5 = 0.0;
  double norm = 0.0;
};

KKTResiduals kkt_residuals(const BilevelProblem& problem, double mu, const Iterate& it);

enum class SolveStatus { converged, max_iterations, linear_solve_failure, non_finite, stalled };

std::string_view to_string(SolveStatus status);

struct TraceRecord {
  int iteration;
  double residual;
  double barrier;
  double step;
  double regularization;
};

struct SolveStats {
  int newton_iters = 0;
  int factorizations = 0;
  std::vector<double> step_sizes;
  double final_barrier = 0.0;
  double merit_penalty = 0.0;
  std::vector<TraceRecord> trace;
  std::string diagnostic;
};

struct SolveResult {
  Iterate iterate;
  KKTResiduals residuals;
  SolveStatus status = SolveStatus::max_iterations;
  SolveStats stats;

  bool converged() const { return status == SolveStatus::converged; }
};

struct InnerOptions {
  int max_iter = 3000;
  double tau0 = 0.1;          // initial barrier parameter on a cold start
  double tau_factor = 0.2;    // barrier reduction factor
  double tau_trigger = 10.0;  // reduce once the barrier KKT norm <= tau_trigger * tau
  double fraction_to_boundary = 0.995;
  double armijo = 1e-4;
  double delta_init = 1e-8;   // first inertia-correcting shift
  double delta_max = 1e40;
  int max_line_search_failures = 25;
  /// Include the diagonal third-derivative term lambda_1 zeta_j (phi_mu)'''_j
  /// in the Lagrangian Hessian. Off: Gauss-Newton-style curvature.
  bool exact_curvature = false;
  /// Hold lambda fixed and solve only for w (test and diagnostic use).
  /// Convergence is then judged on eps1 and eps4 alone.
  bool pin_lambda = false;
  bool record_trace = false;
};

class InnerSolver {
 public:
  explicit InnerSolver(const BilevelProblem& problem, InnerOptions options = {});

  /// Runs Newton iterations from `start` until the KKT residual norm is at most
  /// eps_hat or the budget runs out. lambda and eta are projected to be
  /// strictly positive first. Throws std::invalid_argument when mu < 1e-300.
  SolveResult solve(double mu, double eps_hat, Iterate start);

  const InnerOptions& options() const { return options_; }

 private:
  struct Point;

  void evaluate(double mu, Point& pt, bool derivatives) const;
  int factorize(double tau);
  Eigen::VectorXd back_solve(const Eigen::VectorXd& rhs) const;

  const BilevelProblem& problem_;
  InnerOptions options_;
  int n_;
  int r_;

  // Workspace.
  Eigen::MatrixXd kkt_;       // assembled, unfactored
  Eigen::MatrixXd factor_;    // Bunch-Kaufman factor
  std::vector<int> pivots_;
  double last_delta_ = 0.0;
};

/// One-shot wrapper around InnerSolver.
SolveResult solve_approx_kkt(const BilevelProblem& problem, double mu, double eps_hat,
                             const Iterate& warm_start, const InnerOptions& options = {});

}  // namespace bilevel
