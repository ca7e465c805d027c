// The nonsmooth regularizer R1(w) = sum_i psi(|w_i|^p) and its smoothed
// surrogate phi_mu(w) = sum_i psi(phi(mu, w_i)^p).
//
// The surrogate is separable, so its Hessian is exactly diagonal. Evaluation
// is data-parallel over components: smoothed_reg() runs the component loop
// under OpenMP, smoothed_reg_serial() is the plain reference loop kept for
// testing and benchmarking. Both sum the per-component values serially in
// index order, so they agree bit for bit.
#pragma once

#include <string>

#include <Eigen/Core>

#include "bilevel/kernels.hpp"
#include "bilevel/penalties.hpp"

namespace bilevel {

struct RegSpec {
  /// Throws std::invalid_argument unless 0 < p <= 1.
  RegSpec(double p, Penalty penalty, SmoothAbs smooth);

  double p;
  Penalty penalty;
  SmoothAbs smooth;
  /// Non-empty when p = 1 and the kernel is not strictly positive (C4).
  std::string warning;
};

struct RegEval {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::VectorXd hess_diag;
};

/// psi(phi^p) and its first three derivatives in x for one component.
struct RegComponent {
  double value;
  double d1;
  double d2;
  double d3;
};

RegComponent smoothed_component(const RegSpec& spec, double mu, double x);

double exact_reg(const RegSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& w);

/// Value, gradient and Hessian diagonal of phi_mu at w. Throws for mu <= 0.
RegEval smoothed_reg(const RegSpec& spec, double mu, const Eigen::Ref<const Eigen::VectorXd>& w);
RegEval smoothed_reg_serial(const RegSpec& spec, double mu,
                            const Eigen::Ref<const Eigen::VectorXd>& w);

/// Diagonal of the third derivative tensor of phi_mu.
Eigen::VectorXd smoothed_reg_third(const RegSpec& spec, double mu,
                                   const Eigen::Ref<const Eigen::VectorXd>& w);

/// smoothed_reg(...).value - exact_reg(...).
double smoothed_reg_gap(const RegSpec& spec, double mu, const Eigen::Ref<const Eigen::VectorXd>& w);

/// x^e for x > 0, falling back to log space when x underflows toward zero.
double safe_pow(double x, double e);

/// Components below this count are evaluated without spawning threads.
inline constexpr Eigen::Index kParallelThreshold = 4096;

}  // namespace bilevel
