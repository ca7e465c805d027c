// Concave increasing penalties psi applied to |w_i|^p.
//
//   psi1(t) = t
//   psi2(t) = log(1 + a t)
//   psi3(t) = a t / (1 + a t)
//   psi4(t) = -1 / (1 + a t)
//
// All satisfy 0 < psi'(t) <= alpha and -beta <= psi''(t) <= 0 on t >= 0.
#pragma once

#include <string>
#include <string_view>

namespace bilevel {

enum class PenaltyId { psi1, psi2, psi3, psi4 };

std::string_view to_string(PenaltyId id);
PenaltyId parse_penalty_id(std::string_view name);

class Penalty {
 public:
  struct Derivs {
    double first;
    double second;
  };

  /// Throws std::invalid_argument unless a > 0. `a` is ignored by psi1.
  explicit Penalty(PenaltyId id = PenaltyId::psi1, double a = 1.0);

  PenaltyId id() const { return id_; }
  double a() const { return a_; }

  // These reject t < 0.
  double value(double t) const;
  Derivs derivs(double t) const;
  double third(double t) const;

  /// (alpha, beta) of the derivative bounds.
  double alpha() const;
  double beta() const;

  /// Unchecked evaluation of (psi, psi', psi'', psi''') for the hot loops.
  void eval_unchecked(double t, double& v, double& d1, double& d2, double& d3) const;

 private:
  PenaltyId id_;
  double a_;
};

double psi_eval(const Penalty& penalty, double t);
Penalty::Derivs psi_derivs(const Penalty& penalty, double t);

struct AssumptionAConstants {
  double alpha;
  double beta;
};
AssumptionAConstants assumption_A_constants(const Penalty& penalty);

}  // namespace bilevel
