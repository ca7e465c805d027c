// Independent reference computations shared by the unit and acceptance tests.
// Nothing here calls the closed forms under test.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

namespace oracle {

// Densities written out again from their textbook definitions.
inline double density(int i, double s) {
  const double as = std::abs(s);
  switch (i) {
    case 1: return as <= 1 ? 35.0 / 32.0 * std::pow(1 - s * s, 3) : 0.0;
    case 2: return as <= 1 ? 15.0 / 16.0 * std::pow(1 - s * s, 2) : 0.0;
    case 3: return as <= 1 ? 0.75 * (1 - s * s) : 0.0;
    case 4: return std::exp(-s * s / 2) / std::sqrt(2 * std::numbers::pi);
    case 5: return std::exp(-as) / std::pow(1 + std::exp(-as), 2);
    case 6: return 2.0 / std::pow(s * s + 4, 1.5);
  }
  return 0.0;
}

// int_a^b g by tanh-sinh, splitting at the listed interior points.
inline double integrate(const std::function<double(double)>& g, double a, double b,
                        std::vector<double> cuts = {}) {
  boost::math::quadrature::tanh_sinh<double> ts;
  cuts.push_back(a);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double lo = std::max(a, cuts[k]);
    const double hi = std::min(b, cuts[k + 1]);
    if (hi > lo) total += ts.integrate(g, lo, hi);
  }
  return total;
}

// phi(mu, x) = int |x - mu s| rho(s) ds, computed by quadrature.
// Unbounded kernels use s = tan(theta).
inline double phi_by_convolution(int i, double mu, double x) {
  const double knot = x / mu;
  if (i <= 3) {
    auto g = [&](double s) { return std::abs(x - mu * s) * density(i, s); };
    std::vector<double> cuts;
    if (std::abs(knot) < 1) cuts.push_back(knot);
    return integrate(g, -1.0, 1.0, cuts);
  }
  const double half = std::numbers::pi / 2;
  auto g = [&](double th) {
    const double c = std::cos(th);
    if (c <= 0) return 0.0;
    const double s = std::tan(th);
    return std::abs(x - mu * s) * density(i, s) / (c * c);
  };
  return integrate(g, -half, half, {std::atan(knot)});
}

// 2 int_0^S rho.
inline double central_mass(int i, double S) {
  auto g = [&](double s) { return density(i, s); };
  if (i <= 3) return 2 * integrate(g, 0.0, std::min(S, 1.0));
  const double th = std::atan(S);
  auto h = [&](double t) {
    const double c = std::cos(t);
    return density(i, std::tan(t)) / (c * c);
  };
  return 2 * integrate(h, 0.0, th);
}

// Maclaurin series of erf, summed until the terms vanish.
inline double erf_series(double x) {
  double sum = 0.0;
  double term = x;  // (-1)^n x^(2n+1) / n!
  for (int n = 0; n < 200; ++n) {
    const double add = term / (2 * n + 1);
    sum += add;
    if (std::abs(add) < 1e-18 * std::abs(sum)) break;
    term *= -x * x / (n + 1);
  }
  return 2 / std::sqrt(std::numbers::pi) * sum;
}

inline double central_diff(const std::function<double(double)>& f, double x) {
  const double h = 1e-6 * std::max(1.0, std::abs(x));
  return (f(x + h) - f(x - h)) / (2 * h);
}

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Relative error of an analytic derivative against a central difference of
// a function of size `scale`. Roundoff limits the difference to about
// 1e-10 * scale at h = 1e-6, so references below 1e-4 * scale are compared
// on that absolute footing instead.
inline double fd_rel_err(double analytic, double fd, double scale) {
  return rel_err(analytic, fd, 1e-4 * std::max(1.0, std::abs(scale)));
}

// Global minimizer over w of 1/2 (w - 2)^2 + l2 w^2 + l1 |w|^(1/2).
// For w >= 0 with s = sqrt(w) the stationarity condition is the cubic
// (1 + 2 l2) s^3 - 2 s + l1 / 2 = 0; w < 0 is never better than -w.
inline double lower_level_1d(double l1, double l2) {
  auto h = [&](double w) { return 0.5 * (w - 2) * (w - 2) + l2 * w * w + l1 * std::sqrt(w); };
  const double a = 1 + 2 * l2;
  // Depressed cubic s^3 + P s + Q = 0.
  const double P = -2 / a;
  const double Q = l1 / (2 * a);
  std::vector<double> roots;
  const double disc = Q * Q / 4 + P * P * P / 27;
  if (disc > 0) {
    const double sq = std::sqrt(disc);
    roots.push_back(std::cbrt(-Q / 2 + sq) + std::cbrt(-Q / 2 - sq));
  } else {
    const double r = 2 * std::sqrt(-P / 3);
    const double phi = std::acos(std::clamp(3 * Q / (P * r), -1.0, 1.0));
    for (int k = 0; k < 3; ++k) roots.push_back(r * std::cos((phi - 2 * std::numbers::pi * k) / 3));
  }
  double best_w = 0.0;
  double best = h(0.0);
  for (double s : roots) {
    if (s <= 0) continue;
    const double w = s * s;
    if (h(w) < best) {
      best = h(w);
      best_w = w;
    }
  }
  return best_w;
}

struct GridOptimum {
  double f;
  double l1;
  double l2;
  double w;
};

// Brute force over l1 in [0, 5] step 1e-3 and l2 in [0, 2] step 1e-2 of
// f = 1/2 (w(l) - 1)^2.
inline GridOptimum bilevel_1d_grid() {
  GridOptimum best{std::numeric_limits<double>::infinity(), 0, 0, 0};
  for (int i = 0; i <= 5000; ++i) {
    for (int j = 0; j <= 200; ++j) {
      const double l1 = 1e-3 * i;
      const double l2 = 1e-2 * j;
      const double w = lower_level_1d(l1, l2);
      const double f = 0.5 * (w - 1) * (w - 1);
      if (f < best.f) best = {f, l1, l2, w};
    }
  }
  return best;
}

}  // namespace oracle
