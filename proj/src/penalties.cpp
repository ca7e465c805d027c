#include "bilevel/penalties.hpp"

#include <cmath>
#include <stdexcept>

namespace bilevel {

namespace {

void require_nonneg(double t) {
  if (!(t >= 0.0)) {
    throw std::invalid_argument("penalty argument must be nonnegative, got " + std::to_string(t));
  }
}

}  // namespace

std::string_view to_string(PenaltyId id) {
  switch (id) {
    case PenaltyId::psi1: return "psi1";
    case PenaltyId::psi2: return "psi2";
    case PenaltyId::psi3: return "psi3";
    case PenaltyId::psi4: return "psi4";
  }
  return "unknown";
}

PenaltyId parse_penalty_id(std::string_view name) {
  if (name == "psi1") return PenaltyId::psi1;
  if (name == "psi2") return PenaltyId::psi2;
  if (name == "psi3") return PenaltyId::psi3;
  if (name == "psi4") return PenaltyId::psi4;
  throw std::invalid_argument("unknown penalty id '" + std::string(name) +
                              "' (expected psi1..psi4)");
}

Penalty::Penalty(PenaltyId id, double a) : id_(id), a_(a) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw std::invalid_argument("penalty shape parameter a must be positive and finite");
  }
}

void Penalty::eval_unchecked(double t, double& v, double& d1, double& d2, double& d3) const {
  switch (id_) {
    case PenaltyId::psi1:
      v = t;
      d1 = 1.0;
      d2 = 0.0;
      d3 = 0.0;
      return;
    case PenaltyId::psi2: {
      const double u = 1.0 / (1.0 + a_ * t);
      v = std::log1p(a_ * t);
      d1 = a_ * u;
      d2 = -d1 * d1;
      d3 = 2.0 * d1 * d1 * d1;
      return;
    }
    case PenaltyId::psi3:
    case PenaltyId::psi4: {
      const double u = 1.0 / (1.0 + a_ * t);
      v = id_ == PenaltyId::psi3 ? a_ * t * u : -u;
      d1 = a_ * u * u;
      d2 = -2.0 * a_ * a_ * u * u * u;
      d3 = 6.0 * a_ * a_ * a_ * u * u * u * u;
      return;
    }
  }
}

double Penalty::value(double t) const {
  require_nonneg(t);
  double v = 0, d1 = 0, d2 = 0, d3 = 0;
  eval_unchecked(t, v, d1, d2, d3);
  return v;
}

Penalty::Derivs Penalty::derivs(double t) const {
  require_nonneg(t);
  double v = 0, d1 = 0, d2 = 0, d3 = 0;
  eval_unchecked(t, v, d1, d2, d3);
  return {d1, d2};
}

double Penalty::third(double t) const {
  require_nonneg(t);
  double v = 0, d1 = 0, d2 = 0, d3 = 0;
  eval_unchecked(t, v, d1, d2, d3);
  return d3;
}

double Penalty::alpha() const { return id_ == PenaltyId::psi1 ? 1.0 : a_; }

double Penalty::beta() const {
  switch (id_) {
    case PenaltyId::psi1: return 0.0;
    case PenaltyId::psi2: return a_ * a_;
    case PenaltyId::psi3:
    case PenaltyId::psi4: return 2.0 * a_ * a_;
  }
  return 0.0;
}

double psi_eval(const Penalty& penalty, double t) { return penalty.value(t); }

Penalty::Derivs psi_derivs(const Penalty& penalty, double t) { return penalty.derivs(t); }

AssumptionAConstants assumption_A_constants(const Penalty& penalty) {
  return {penalty.alpha(), penalty.beta()};
}

}  // namespace bilevel
