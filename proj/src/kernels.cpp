#include "bilevel/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace bilevel {

namespace {

constexpr double kQuadTol = 1e-10;
constexpr unsigned kQuadDepth = 20;

template <typename F>
double integrate(F&& f, double a, double b) {
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 61>::integrate(f, a, b, kQuadDepth, kQuadTol);
}

void require_positive_mu(double mu) {
  if (!(mu > 0.0)) {
    throw std::invalid_argument("smoothing parameter mu must be positive, got " +
                                std::to_string(mu));
  }
}

}  // namespace

std::string_view to_string(KernelId id) {
  switch (id) {
    case KernelId::rho1: return "rho1";
    case KernelId::rho2: return "rho2";
    case KernelId::rho3: return "rho3";
    case KernelId::rho4: return "rho4";
    case KernelId::rho5: return "rho5";
    case KernelId::rho6: return "rho6";
  }
  return "unknown";
}

KernelId parse_kernel_id(std::string_view name) {
  if (name.size() == 4 && (name.substr(0, 3) == "rho" || name.substr(0, 3) == "phi")) {
    const char c = name[3];
    if (c >= '1' && c <= '6') return kAllKernels[static_cast<std::size_t>(c - '1')];
  }
  throw std::invalid_argument("unknown kernel id '" + std::string(name) +
                              "' (expected rho1..rho6)");
}

int kernel_index(KernelId id) { return static_cast<int>(id) + 1; }

DensityKernel::DensityKernel(KernelId id) : id_(id) {
  auto moment = [this](double x) { return x * eval(x); };
  const double upper = compact_support() ? 1.0 : std::numeric_limits<double>::infinity();
  kappa_ = 2.0 * integrate(moment, 0.0, upper);
}

bool DensityKernel::compact_support() const {
  return id_ == KernelId::rho1 || id_ == KernelId::rho2 || id_ == KernelId::rho3;
}

double DensityKernel::eval(double x) const {
  const double ax = std::abs(x);
  switch (id_) {
    case KernelId::rho1: {
      if (ax > 1.0) return 0.0;
      const double u = 1.0 - x * x;
      return 35.0 / 32.0 * u * u * u;
    }
    case KernelId::rho2: {
      if (ax > 1.0) return 0.0;
      const double u = 1.0 - x * x;
      return 15.0 / 16.0 * u * u;
    }
    case KernelId::rho3:
      if (ax > 1.0) return 0.0;
      return 0.75 * (1.0 - x * x);
    case KernelId::rho4:
      return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    case KernelId::rho5: {
      const double e = std::exp(-ax);
      return e / ((1.0 + e) * (1.0 + e));
    }
    case KernelId::rho6: {
      // Normalized so that it integrates to one and induces sqrt(4 mu^2 + x^2).
      const double s = x * x + 4.0;
      return 2.0 / (s * std::sqrt(s));
    }
  }
  return 0.0;
}

double DensityKernel::derivative(double x) const {
  const double ax = std::abs(x);
  switch (id_) {
    case KernelId::rho1: {
      if (ax > 1.0) return 0.0;
      const double u = 1.0 - x * x;
      return -105.0 / 16.0 * x * u * u;
    }
    case KernelId::rho2:
      if (ax > 1.0) return 0.0;
      return -15.0 / 4.0 * x * (1.0 - x * x);
    case KernelId::rho3:
      if (ax > 1.0) return 0.0;
      return -1.5 * x;
    case KernelId::rho4:
      return -x * eval(x);
    case KernelId::rho5:
      return -std::tanh(0.5 * x) * eval(x);
    case KernelId::rho6: {
      const double s = x * x + 4.0;
      return -6.0 * x / (s * s * std::sqrt(s));
    }
  }
  return 0.0;
}

DensityKernel make_kernel(KernelId id) { return DensityKernel(id); }

double erf_approx(double x) {
  if (std::isnan(x)) return x;
  return x < 0.0 ? -std::erf(-x) : std::erf(x);
}

SmoothAbs::Derivs SmoothAbs::eval_unchecked(double mu, double x) const {
  Derivs d = eval_raw(mu, x);
  // phi >= |x| holds exactly; keep rounding in the closed forms from breaking it.
  d.value = std::max(d.value, std::abs(x));
  return d;
}

SmoothAbs::Derivs SmoothAbs::eval_raw(double mu, double x) const {
  const double t = x / mu;
  const double at = std::abs(t);
  const double second = 2.0 / mu * kernel_.eval(t);
  const double third = 2.0 / (mu * mu) * kernel_.derivative(t);
  const double sgn = (x > 0.0) - (x < 0.0);

  switch (kernel_.id()) {
    case KernelId::rho1: {
      if (at > 1.0) return {std::abs(x), sgn, 0.0, 0.0};
      const double t2 = t * t;
      const double v = 35.0 / 128.0 +
                       t2 * (35.0 / 32.0 + t2 * (-35.0 / 64.0 + t2 * (7.0 / 32.0 - t2 * 5.0 / 128.0)));
      const double d = t * (35.0 / 16.0 + t2 * (-35.0 / 16.0 + t2 * (21.0 / 16.0 - t2 * 5.0 / 16.0)));
      return {mu * v, d, second, third};
    }
    case KernelId::rho2: {
      if (at > 1.0) return {std::abs(x), sgn, 0.0, 0.0};
      const double t2 = t * t;
      const double v = 5.0 / 16.0 + t2 * (15.0 / 16.0 + t2 * (-5.0 / 16.0 + t2 / 16.0));
      const double d = t * (15.0 / 8.0 + t2 * (-5.0 / 4.0 + t2 * 3.0 / 8.0));
      return {mu * v, d, second, third};
    }
    case KernelId::rho3: {
      if (at > 1.0) return {std::abs(x), sgn, 0.0, 0.0};
      const double t2 = t * t;
      const double v = 3.0 / 8.0 + t2 * (3.0 / 4.0 - t2 / 8.0);
      const double d = t * (1.5 - 0.5 * t2);
      return {mu * v, d, second, third};
    }
    case KernelId::rho4: {
      const double e = erf_approx(t / std::numbers::sqrt2);
      const double v = x * e + std::sqrt(2.0 / std::numbers::pi) * mu * std::exp(-0.5 * t * t);
      return {v, e, second, third};
    }
    case KernelId::rho5: {
      // mu * [softplus(-t) + softplus(t)] with softplus(z) = max(z, 0) + log1p(exp(-|z|)).
      const double v = mu * (at + 2.0 * std::log1p(std::exp(-at)));
      return {v, std::tanh(0.5 * t), second, third};
    }
    case KernelId::rho6: {
      const double h = std::hypot(2.0 * mu, x);
      return {h, x / h, second, third};
    }
  }
  return {0.0, 0.0, 0.0, 0.0};
}

double SmoothAbs::phi(double mu, double x) const {
  require_positive_mu(mu);
  return eval_unchecked(mu, x).value;
}

double SmoothAbs::phi_prime(double mu, double x) const {
  require_positive_mu(mu);
  return eval_unchecked(mu, x).first;
}

double SmoothAbs::phi_second(double mu, double x) const {
  require_positive_mu(mu);
  return 2.0 / mu * kernel_.eval(x / mu);
}

double SmoothAbs::phi_third(double mu, double x) const {
  require_positive_mu(mu);
  return 2.0 / (mu * mu) * kernel_.derivative(x / mu);
}

SmoothAbs make_smooth_abs(DensityKernel kernel) { return SmoothAbs(kernel); }

SmoothAbs make_smooth_abs(KernelId id) { return SmoothAbs(DensityKernel(id)); }

double central_mass_quadrature(const DensityKernel& kernel, double S) {
  S = std::abs(S);
  if (S == 0.0) return 0.0;
  auto rho = [&kernel](double x) { return kernel.eval(x); };
  if (kernel.compact_support()) return 2.0 * integrate(rho, 0.0, std::min(S, 1.0));
  if (std::isinf(S)) return 2.0 * integrate(rho, 0.0, S);
  // Split so the adaptive rule sees the bulk of the mass on its own.
  if (S > 8.0) return 2.0 * (integrate(rho, 0.0, 8.0) + integrate(rho, 8.0, S));
  return 2.0 * integrate(rho, 0.0, S);
}

double total_mass_quadrature(const DensityKernel& kernel) {
  auto rho = [&kernel](double x) { return kernel.eval(x); };
  if (kernel.compact_support()) {
    return integrate(rho, -1.0, 0.0) + integrate(rho, 0.0, 1.0);
  }
  const double inf = std::numeric_limits<double>::infinity();
  return integrate(rho, -inf, 0.0) + integrate(rho, 0.0, inf);
}

AssumptionCReport check_assumption_C(const DensityKernel& kernel,
                                     std::span<const double> grid) {
  if (grid.empty()) throw std::invalid_argument("check_assumption_C: empty grid");

  AssumptionCReport report;
  report.c3_min_margin = std::numeric_limits<double>::infinity();

  std::vector<double> nonneg;
  for (double x : grid) {
    const double a = kernel.eval(x);
    const double b = kernel.eval(-x);
    if (std::abs(a - b) > 1e-15 * std::max(1.0, std::abs(a))) report.c1_symmetric = false;
    if (!(a > 0.0)) report.c4_positive = false;
    nonneg.push_back(std::abs(x));

    const double S = std::abs(x);
    const double margin = central_mass_quadrature(kernel, S) - (1.0 - 4.0 / (S * S + 4.0));
    report.c3_min_margin = std::min(report.c3_min_margin, margin);
    if (margin < -1e-12) report.c3_mass_growth = false;
  }

  std::sort(nonneg.begin(), nonneg.end());
  for (std::size_t i = 1; i < nonneg.size(); ++i) {
    if (kernel.eval(nonneg[i]) > kernel.eval(nonneg[i - 1])) report.c2_nonincreasing = false;
  }
  return report;
}

}  // namespace bilevel
