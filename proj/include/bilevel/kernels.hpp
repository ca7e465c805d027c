// Density kernels and the smoothing functions of |x| they induce.
//
// Each kernel rho is a symmetric probability density. Convolving |x| with the
// scaled density (1/mu) rho(x/mu) gives a smooth surrogate phi(mu, x) with
//
//   0 <= phi(mu, x) - |x| <= kappa * mu,   kappa = int |x| rho(x) dx,
//   phi'(mu, x)  = 2 sgn(x) int_0^{|x|/mu} rho(t) dt,
//   phi''(mu, x) = (2 / mu) rho(x / mu).
//
// The six built-in kernels have closed-form smoothing functions; rho1..rho3
// have compact support [-1, 1], rho4..rho6 are strictly positive.
#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>

namespace bilevel {

enum class KernelId { rho1, rho2, rho3, rho4, rho5, rho6 };

inline constexpr std::array<KernelId, 6> kAllKernels = {
    KernelId::rho1, KernelId::rho2, KernelId::rho3,
    KernelId::rho4, KernelId::rho5, KernelId::rho6};

/// "rho1".."rho6".
std::string_view to_string(KernelId id);

/// Accepts "rho1".."rho6"; also "phi1".."phi6" as aliases. Throws
/// std::invalid_argument otherwise.
KernelId parse_kernel_id(std::string_view name);

/// Index 1..6 of the kernel, as used in result tables.
int kernel_index(KernelId id);

class DensityKernel {
 public:
  /// Builds the kernel and integrates kappa numerically.
  explicit DensityKernel(KernelId id);

  KernelId id() const { return id_; }

  double operator()(double x) const { return eval(x); }
  double eval(double x) const;
  /// rho'(x); used for third derivatives of phi.
  double derivative(double x) const;

  double kappa() const { return kappa_; }

  /// True when rho vanishes outside [-1, 1].
  bool compact_support() const;

 private:
  KernelId id_;
  double kappa_ = 0.0;
};

DensityKernel make_kernel(KernelId id);

/// erf with exact odd symmetry.
double erf_approx(double x);

class SmoothAbs {
 public:
  struct Derivs {
    double value;
    double first;
    double second;
    double third;
  };

  explicit SmoothAbs(DensityKernel kernel) : kernel_(kernel) {}

  const DensityKernel& kernel() const { return kernel_; }
  KernelId id() const { return kernel_.id(); }

  // All of these throw std::invalid_argument for mu <= 0.
  double phi(double mu, double x) const;
  double phi_prime(double mu, double x) const;
  double phi_second(double mu, double x) const;
  double phi_third(double mu, double x) const;

  /// Value and the first three x-derivatives in one pass. No argument
  /// checking; callers validate mu once per vector.
  Derivs eval_unchecked(double mu, double x) const;

 private:
  Derivs eval_raw(double mu, double x) const;

  DensityKernel kernel_;
};

SmoothAbs make_smooth_abs(DensityKernel kernel);

/// Convenience: make_smooth_abs(make_kernel(id)).
SmoothAbs make_smooth_abs(KernelId id);

struct AssumptionCReport {
  bool c1_symmetric = true;
  bool c2_nonincreasing = true;
  bool c3_mass_growth = true;
  bool c4_positive = true;
  /// min over the grid of 2 int_0^S rho - (1 - 4 / (S^2 + 4)).
  double c3_min_margin = 0.0;

  bool all() const {
    return c1_symmetric && c2_nonincreasing && c3_mass_growth && c4_positive;
  }
};

/// Evaluates (C1)-(C4) on the given sample points. (C3) uses c = 4, r = 2 with
/// S = |x| and the mass computed by adaptive quadrature. Throws
/// std::invalid_argument on an empty grid.
AssumptionCReport check_assumption_C(const DensityKernel& kernel,
                                     std::span<const double> grid);

/// 2 int_0^S rho(x) dx by adaptive quadrature (tolerance 1e-10).
double central_mass_quadrature(const DensityKernel& kernel, double S);

/// int_R rho(x) dx by adaptive quadrature.
double total_mass_quadrature(const DensityKernel& kernel);

}  // namespace bilevel
