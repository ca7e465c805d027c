#include "bilevel/inner_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <lapacke.h>

namespace bilevel {

namespace {

constexpr double kMuGuard = 1e-300;
constexpr double kPositiveFloor = 1e-12;

double fraction_to_boundary(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, double ftb) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv[i] < 0.0) alpha = std::min(alpha, -ftb * v[i] / dv[i]);
  }
  return alpha;
}

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

std::string first_nonfinite(const char* name, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      std::ostringstream os;
      os << name << '[' << i << "] = " << v[i];
      return os.str();
    }
  }
  return {};
}

}  // namespace

Iterate Iterate::cold(const Eigen::VectorXd& w, int r, double lambda0, double eta0) {
  Iterate it;
  it.w = w;
  it.lambda = Eigen::VectorXd::Constant(r, lambda0);
  it.zeta = Eigen::VectorXd::Zero(w.size());
  it.eta = Eigen::VectorXd::Constant(r, eta0);
  return it;
}

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iterations: return "max_iterations";
    case SolveStatus::linear_solve_failure: return "linear_solve_failure";
    case SolveStatus::non_finite: return "non_finite";
    case SolveStatus::stalled: return "stalled";
  }
  return "unknown";
}

KKTResiduals kkt_residuals(const BilevelProblem& problem, double mu, const Iterate& it) {
  const int n = problem.dim();
  const int r = problem.num_hyper();
  if (it.w.size() != n || it.zeta.size() != n || it.lambda.size() != r || it.eta.size() != r) {
    throw std::invalid_argument("kkt_residuals: iterate dimensions do not match the problem");
  }
  const Eigen::VectorXd lambda_bar = it.lambda.tail(r - 1);
  const RegEval reg = smoothed_reg(problem.reg_spec(), mu, it.w);

  KKTResiduals res;
  Eigen::MatrixXd H = problem.lower_hess(it.w, lambda_bar);
  H.diagonal() += it.lambda[0] * reg.hess_diag;
  res.eps1 = problem.upper_grad(it.w) + H * it.zeta;
  res.eps2 = reg.grad.dot(it.zeta) - it.eta[0];
  res.eps3.resize(r - 1);
  for (int j = 0; j < r - 1; ++j) {
    res.eps3[j] = problem.reg_grad(j, it.w).dot(it.zeta) - it.eta[j + 1];
  }
  res.eps4 = problem.lower_grad(it.w, lambda_bar) + it.lambda[0] * reg.grad;
  res.eps5 = it.lambda.dot(it.eta);
  res.norm = std::sqrt(res.eps1.squaredNorm() + res.eps2 * res.eps2 + res.eps3.squaredNorm() +
                       res.eps4.squaredNorm() + res.eps5 * res.eps5);
  return res;
}

struct InnerSolver::Point {
  Eigen::VectorXd w;
  Eigen::VectorXd lambda;

  double f = 0.0;
  Eigen::VectorXd grad_f;
  Eigen::VectorXd c;
  RegEval reg;

  // Filled when derivatives are requested.
  Eigen::MatrixXd hess_f;
  Eigen::MatrixXd jac_w;  // hess_ww G + lambda_1 diag(hess phi_mu)
  Eigen::MatrixXd jac_l;  // [grad phi_mu, grad R_2, ..., grad R_r]
  std::vector<Eigen::MatrixXd> reg_hess;
  Eigen::VectorXd third;

  bool finite() const {
    return std::isfinite(f) && all_finite(grad_f) && all_finite(c) && all_finite(reg.hess_diag);
  }
};

InnerSolver::InnerSolver(const BilevelProblem& problem, InnerOptions options)
    : problem_(problem), options_(options), n_(problem.dim()), r_(problem.num_hyper()) {
  const int N = 2 * n_ + r_;
  kkt_.resize(N, N);
  factor_.resize(N, N);
  pivots_.resize(static_cast<std::size_t>(N));
}

void InnerSolver::evaluate(double mu, Point& pt, bool derivatives) const {
  const Eigen::VectorXd lambda_bar = pt.lambda.tail(r_ - 1);
  pt.f = problem_.upper(pt.w);
  pt.grad_f = problem_.upper_grad(pt.w);
  pt.reg = smoothed_reg(problem_.reg_spec(), mu, pt.w);
  pt.c = problem_.lower_grad(pt.w, lambda_bar) + pt.lambda[0] * pt.reg.grad;
  if (!derivatives) return;

  pt.hess_f = problem_.upper_hess(pt.w);
  pt.jac_w = problem_.lower_hess(pt.w, lambda_bar);
  pt.jac_w.diagonal() += pt.lambda[0] * pt.reg.hess_diag;
  pt.jac_l.resize(n_, r_);
  pt.jac_l.col(0) = pt.reg.grad;
  pt.reg_hess.resize(static_cast<std::size_t>(r_ - 1));
  for (int j = 0; j < r_ - 1; ++j) {
    pt.jac_l.col(j + 1) = problem_.reg_grad(j, pt.w);
    pt.reg_hess[static_cast<std::size_t>(j)] = problem_.reg_hess(j, pt.w);
  }
  if (options_.exact_curvature) pt.third = smoothed_reg_third(problem_.reg_spec(), mu, pt.w);
}

// Factorizes kkt_ + diag(delta_w on the primal block, -delta_c on the dual
// block) with inertia correction. Returns the number of factorizations, or -1
// when no admissible shift was found.
int InnerSolver::factorize(double tau) {
  const int N = 2 * n_ + r_;
  const int n_primal = n_ + r_;
  const double scale = std::max(1.0, kkt_.cwiseAbs().maxCoeff());

  double delta_w = 0.0;
  double delta_c = 0.0;
  int attempts = 0;

  while (true) {
    factor_ = kkt_;
    factor_.diagonal().head(n_primal).array() += delta_w;
    factor_.diagonal().tail(n_).array() -= delta_c;
    ++attempts;
    const lapack_int info = LAPACKE_dsytrf(LAPACK_COL_MAJOR, 'L', N, factor_.data(), N,
                                           reinterpret_cast<lapack_int*>(pivots_.data()));
    int pos = 0, neg = 0, zero = 0;
    if (info >= 0) {
      for (int k = 0; k < N; ++k) {
        if (pivots_[static_cast<std::size_t>(k)] > 0) {
          const double d = factor_(k, k);
          if (std::abs(d) <= 1e-14 * scale) ++zero;
          else if (d > 0.0) ++pos;
          else ++neg;
        } else {
          const double a = factor_(k, k), b = factor_(k + 1, k), c = factor_(k + 1, k + 1);
          const double det = a * c - b * b;
          if (std::abs(det) <= 1e-28 * scale * scale) {
            ++zero;
            (a + c > 0.0 ? pos : neg) += 1;
          } else if (det < 0.0) {
            ++pos;
            ++neg;
          } else {
            (a + c > 0.0 ? pos : neg) += 2;
          }
          ++k;
        }
      }
    }
    if (info == 0 && zero == 0 && pos == n_primal && neg == n_) {
      if (delta_w > 0.0) last_delta_ = delta_w;
      return attempts;
    }

    if (zero > 0 && delta_c == 0.0) {
      delta_c = 1e-8 * std::pow(std::max(tau, 1e-16), 0.25);
      continue;
    }
    if (delta_w == 0.0) {
      delta_w = last_delta_ == 0.0 ? options_.delta_init
                                   : std::max(options_.delta_init, last_delta_ / 3.0);
    } else {
      delta_w *= 10.0;
    }
    if (delta_w > options_.delta_max) return -1;
  }
}

Eigen::VectorXd InnerSolver::back_solve(const Eigen::VectorXd& rhs) const {
  const int N = 2 * n_ + r_;
  Eigen::VectorXd x = rhs;
  LAPACKE_dsytrs(LAPACK_COL_MAJOR, 'L', N, 1, factor_.data(), N,
                 reinterpret_cast<const lapack_int*>(pivots_.data()), x.data(), N);
  return x;
}

SolveResult InnerSolver::solve(double mu, double eps_hat, Iterate start) {
  if (!(mu >= kMuGuard)) {
    throw std::invalid_argument("inner solver: smoothing parameter below 1e-300 is refused");
  }
  if (eps_hat < 0.0) throw std::invalid_argument("inner solver: eps_hat must be nonnegative");
  if (start.w.size() != n_ || start.zeta.size() != n_ || start.lambda.size() != r_ ||
      start.eta.size() != r_) {
    throw std::invalid_argument("inner solver: warm start dimensions do not match the problem");
  }
  static_assert(sizeof(lapack_int) == sizeof(int), "LAPACK integer width mismatch");

  const bool pinned = options_.pin_lambda;
  const int n = n_, r = r_, N = 2 * n + r;

  Iterate it = std::move(start);
  it.lambda = it.lambda.cwiseMax(kPositiveFloor);
  it.eta = it.eta.cwiseMax(kPositiveFloor);

  const double tau_min = std::max(1e-14, eps_hat / (10.0 * (r + 1)));
  double tau = pinned ? 0.0
                      : std::clamp(it.lambda.dot(it.eta) / r, tau_min, options_.tau0);
  double nu = 1.0;
  int ls_failures = 0;
  last_delta_ = 0.0;

  SolveResult result;
  SolveStats& stats = result.stats;

  Point pt;
  pt.w = it.w;
  pt.lambda = it.lambda;

  Iterate best = it;
  double best_norm = std::numeric_limits<double>::infinity();

  // Residual blocks at the current point; returns (unperturbed, barrier) norms.
  auto residual_norms = [&](const Point& p, const Iterate& cur) {
    const Eigen::VectorXd e1 = p.grad_f + p.jac_w * cur.zeta;
    const Eigen::VectorXd dual_l = p.jac_l.transpose() * cur.zeta - cur.eta;
    const double e4 = p.c.squaredNorm();
    if (pinned) {
      const double v = std::sqrt(e1.squaredNorm() + e4);
      return std::pair{v, v};
    }
    const double comp = cur.lambda.dot(cur.eta);
    const double comp_tau = (cur.lambda.cwiseProduct(cur.eta).array() - tau).matrix().squaredNorm();
    const double common = e1.squaredNorm() + dual_l.squaredNorm() + e4;
    return std::pair{std::sqrt(common + comp * comp), std::sqrt(common + comp_tau)};
  };

  auto merit = [&](const Point& p) {
    double m = p.f + nu * p.c.lpNorm<1>();
    if (!pinned) m -= tau * p.lambda.array().log().sum();
    return m;
  };

  SolveStatus status = SolveStatus::max_iterations;
  for (int iter = 0;; ++iter) {
    evaluate(mu, pt, true);
    if (!pt.finite() || !all_finite(it.zeta) || !all_finite(it.eta)) {
      status = SolveStatus::non_finite;
      std::string where = first_nonfinite("w", pt.w);
      if (where.empty()) where = first_nonfinite("grad_f", pt.grad_f);
      if (where.empty()) where = first_nonfinite("constraint", pt.c);
      if (where.empty()) where = first_nonfinite("hess_phi_mu", pt.reg.hess_diag);
      if (where.empty()) where = first_nonfinite("zeta", it.zeta);
      if (where.empty()) where = first_nonfinite("eta", it.eta);
      stats.diagnostic = "non-finite value at iteration " + std::to_string(iter) + ": " + where;
      break;
    }

    auto [norm, barrier_norm] = residual_norms(pt, it);
    if (norm < best_norm) {
      best_norm = norm;
      best = it;
    }
    if (options_.record_trace) {
      stats.trace.push_back({iter, norm, tau, stats.step_sizes.empty() ? 0.0 : stats.step_sizes.back(),
                             last_delta_});
    }
    if (norm <= eps_hat) {
      status = SolveStatus::converged;
      best = it;
      break;
    }
    if (iter >= options_.max_iter) {
      status = SolveStatus::max_iterations;
      stats.diagnostic = "Newton budget of " + std::to_string(options_.max_iter) + " exhausted";
      break;
    }

    if (!pinned) {
      while (tau > tau_min && barrier_norm <= options_.tau_trigger * tau) {
        tau = std::max(tau_min, options_.tau_factor * tau);
        barrier_norm = residual_norms(pt, it).second;
      }
    }

    // Assemble the primal-dual matrix over (dw, dlambda, zeta+); lower triangle suffices.
    kkt_.setZero();
    kkt_.topLeftCorner(n, n) = pt.hess_f;
    if (options_.exact_curvature) {
      kkt_.diagonal().head(n) += it.lambda[0] * pt.third.cwiseProduct(it.zeta);
    }
    if (pinned) {
      kkt_.block(n, n, r, r).setIdentity();
      kkt_.block(n + r, 0, n, n) = pt.jac_w;
    } else {
      kkt_.block(n, 0, 1, n) = pt.reg.hess_diag.cwiseProduct(it.zeta).transpose();
      for (int j = 0; j < r - 1; ++j) {
        kkt_.block(n + 1 + j, 0, 1, n) =
            (pt.reg_hess[static_cast<std::size_t>(j)] * it.zeta).transpose();
      }
      kkt_.block(0, n, n, r) = kkt_.block(n, 0, r, n).transpose();
      kkt_.diagonal().segment(n, r) = it.eta.cwiseQuotient(it.lambda);
      kkt_.block(n + r, 0, n, n) = pt.jac_w;
      kkt_.block(n + r, n, n, r) = pt.jac_l;
    }
    kkt_.block(0, n + r, n + r, n) = kkt_.block(n + r, 0, n, n + r).transpose();

    Eigen::VectorXd grad_b(n + r);
    grad_b.head(n) = pt.grad_f;
    if (pinned) grad_b.tail(r).setZero();
    else grad_b.tail(r) = -tau * it.lambda.cwiseInverse();

    Eigen::VectorXd rhs(N);
    rhs.head(n + r) = -grad_b;
    rhs.tail(n) = -pt.c;

    const int attempts = factorize(tau);
    if (attempts < 0) {
      status = SolveStatus::linear_solve_failure;
      stats.diagnostic = "no inertia-correcting shift below " + std::to_string(options_.delta_max);
      break;
    }
    stats.factorizations += attempts;

    const Eigen::VectorXd sol = back_solve(rhs);
    if (!all_finite(sol)) {
      status = SolveStatus::linear_solve_failure;
      stats.diagnostic = "non-finite Newton direction";
      break;
    }
    const Eigen::VectorXd dx = sol.head(n + r);
    const Eigen::VectorXd zeta_plus = sol.tail(n);
    const Eigen::VectorXd dl = dx.tail(r);

    Eigen::VectorXd d_eta = Eigen::VectorXd::Zero(r);
    double alpha_p = 1.0, alpha_d = 1.0;
    if (!pinned) {
      d_eta = (tau * it.lambda.cwiseInverse() - it.eta -
               it.eta.cwiseQuotient(it.lambda).cwiseProduct(dl));
      alpha_p = fraction_to_boundary(it.lambda, dl, options_.fraction_to_boundary);
      alpha_d = fraction_to_boundary(it.eta, d_eta, options_.fraction_to_boundary);
    }

    // l1 merit penalty large enough for dx to be a descent direction.
    const double c1 = pt.c.lpNorm<1>();
    const double gtd = grad_b.dot(dx);
    const double dWd = dx.dot(kkt_.topLeftCorner(n + r, n + r) * dx);
    if (c1 > 0.0) {
      const double needed = (gtd + 0.5 * std::max(0.0, dWd)) / (0.9 * c1);
      if (nu < needed) nu = needed + 1.0;
    }
    const double directional = gtd - nu * c1;
    const double m0 = merit(pt);

    Point trial;
    trial.lambda = it.lambda;
    double alpha = alpha_p;
    bool accepted = false;
    bool tried_soc = false;
    Eigen::VectorXd step = dx;
    while (alpha > 1e-16) {
      trial.w = it.w + alpha * step.head(n);
      trial.lambda = it.lambda + alpha * step.tail(r);
      evaluate(mu, trial, false);
      const double m1 = merit(trial);
      if (std::isfinite(m1) && m1 <= m0 + options_.armijo * alpha * std::min(directional, 0.0)) {
        accepted = true;
        break;
      }
      // One second-order correction on the full step against constraint curvature.
      if (!tried_soc && alpha == alpha_p && std::isfinite(m1) &&
          trial.c.lpNorm<1>() >= c1) {
        tried_soc = true;
        Eigen::VectorXd rhs_soc(N);
        rhs_soc.head(n + r) = -grad_b;
        rhs_soc.tail(n) = -(alpha * pt.c + trial.c);
        const Eigen::VectorXd soc = back_solve(rhs_soc).head(n + r) / alpha;
        double alpha_soc = alpha;
        if (!pinned) {
          alpha_soc = std::min(alpha, fraction_to_boundary(it.lambda, alpha * soc.tail(r),
                                                           options_.fraction_to_boundary));
        }
        Point t2;
        t2.w = it.w + alpha_soc * soc.head(n);
        t2.lambda = it.lambda + alpha_soc * soc.tail(r);
        evaluate(mu, t2, false);
        const double m2 = merit(t2);
        if (std::isfinite(m2) && m2 <= m0 + options_.armijo * alpha * std::min(directional, 0.0)) {
          trial = std::move(t2);
          step = soc;
          alpha = alpha_soc;
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }

    ++stats.newton_iters;
    if (!accepted) {
      stats.step_sizes.push_back(0.0);
      if (++ls_failures > options_.max_line_search_failures) {
        status = SolveStatus::stalled;
        stats.diagnostic = "line search made no progress";
        break;
      }
      // Shorter, more gradient-like directions on the next attempt.
      last_delta_ = std::max(last_delta_ * 100.0, 1e-4);
      nu *= 2.0;
      continue;
    }
    ls_failures = 0;
    stats.step_sizes.push_back(alpha);

    it.w = trial.w;
    it.lambda = trial.lambda;
    it.zeta += alpha * (zeta_plus - it.zeta);
    if (!pinned) {
      it.eta += alpha_d * d_eta;
      // Keep eta within a bounded factor of the central-path value.
      for (int i = 0; i < r; ++i) {
        const double centre = tau / it.lambda[i];
        it.eta[i] = std::clamp(it.eta[i], centre / 1e10, centre * 1e10);
      }
    }
    pt.w = it.w;
    pt.lambda = it.lambda;
  }

  result.status = status;
  result.iterate = (status == SolveStatus::converged) ? it : best;
  result.residuals = kkt_residuals(problem_, mu, result.iterate);
  stats.final_barrier = tau;
  stats.merit_penalty = nu;
  return result;
}

SolveResult solve_approx_kkt(const BilevelProblem& problem, double mu, double eps_hat,
                             const Iterate& warm_start, const InnerOptions& options) {
  InnerSolver solver(problem, options);
  return solver.solve(mu, eps_hat, warm_start);
}

}  // namespace bilevel
