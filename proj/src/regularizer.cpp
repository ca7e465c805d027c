#include "bilevel/regularizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bilevel {

namespace {

void require_positive_mu(double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("smoothing parameter mu must be positive");
}

}  // namespace

RegSpec::RegSpec(double p_, Penalty penalty_, SmoothAbs smooth_)
    : p(p_), penalty(penalty_), smooth(smooth_) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw std::invalid_argument("regularizer exponent p must lie in (0, 1], got " +
                                std::to_string(p));
  }
  if (p == 1.0 && smooth.kernel().compact_support()) {
    warning = std::string("kernel ") + std::string(to_string(smooth.id())) +
              " is not strictly positive; convergence theory for p = 1 requires (C4)";
  }
}

double safe_pow(double x, double e) {
  if (x < 1e-150) return std::exp(e * std::log(x));
  return std::pow(x, e);
}

RegComponent smoothed_component(const RegSpec& spec, double mu, double x) {
  const auto d = spec.smooth.eval_unchecked(mu, x);
  const double p = spec.p;
  const double u = d.value;

  // s = u^p and its x-derivatives.
  const double up1 = safe_pow(u, p - 1.0);
  const double s = u * up1;
  const double s1 = p * up1 * d.first;
  double s2 = p * up1 * d.second;
  double s3 = p * up1 * d.third;
  if (p != 1.0) {
    const double up2 = up1 / u;
    const double up3 = up2 / u;
    s2 += p * (p - 1.0) * up2 * d.first * d.first;
    s3 += p * (p - 1.0) * (p - 2.0) * up3 * d.first * d.first * d.first +
          3.0 * p * (p - 1.0) * up2 * d.first * d.second;
  }

  double v, g1, g2, g3;
  spec.penalty.eval_unchecked(s, v, g1, g2, g3);
  return {v, g1 * s1, g2 * s1 * s1 + g1 * s2,
          g3 * s1 * s1 * s1 + 3.0 * g2 * s1 * s2 + g1 * s3};
}

double exact_reg(const RegSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& w) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    total += spec.penalty.value(std::pow(std::abs(w[i]), spec.p));
  }
  return total;
}

RegEval smoothed_reg_serial(const RegSpec& spec, double mu,
                            const Eigen::Ref<const Eigen::VectorXd>& w) {
  require_positive_mu(mu);
  const Eigen::Index n = w.size();
  RegEval out;
  out.grad.resize(n);
  out.hess_diag.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto c = smoothed_component(spec, mu, w[i]);
    out.value += c.value;
    out.grad[i] = c.d1;
    out.hess_diag[i] = c.d2;
  }
  return out;
}

RegEval smoothed_reg(const RegSpec& spec, double mu, const Eigen::Ref<const Eigen::VectorXd>& w) {
  require_positive_mu(mu);
  const Eigen::Index n = w.size();
  RegEval out;
  out.grad.resize(n);
  out.hess_diag.resize(n);
  Eigen::VectorXd values(n);

#pragma omp parallel for schedule(static) if (n >= kParallelThreshold)
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto c = smoothed_component(spec, mu, w[i]);
    values[i] = c.value;
    out.grad[i] = c.d1;
    out.hess_diag[i] = c.d2;
  }

  // Serial index-order sum keeps the value identical to the reference loop.
  for (Eigen::Index i = 0; i < n; ++i) out.value += values[i];
  return out;
}

Eigen::VectorXd smoothed_reg_third(const RegSpec& spec, double mu,
                                   const Eigen::Ref<const Eigen::VectorXd>& w) {
  require_positive_mu(mu);
  const Eigen::Index n = w.size();
  Eigen::VectorXd out(n);
#pragma omp parallel for schedule(static) if (n >= kParallelThreshold)
  for (Eigen::Index i = 0; i < n; ++i) out[i] = smoothed_component(spec, mu, w[i]).d3;
  return out;
}

double smoothed_reg_gap(const RegSpec& spec, double mu, const Eigen::Ref<const Eigen::VectorXd>& w) {
  require_positive_mu(mu);
  // Summed per component; phi >= |x| and psi increasing make each term
  // nonnegative, so only rounding can push one below zero.
  double total = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double exact = spec.penalty.value(std::pow(std::abs(w[i]), spec.p));
    total += std::max(0.0, smoothed_component(spec, mu, w[i]).value - exact);
  }
  return total;
}

}  // namespace bilevel
