// Bilevel hyperparameter problems
//
//   min_{w, lambda}  f(w)
//   s.t.  w in argmin  G(w, lambda_bar) + lambda_1 R1(w),   lambda >= 0,
//
// with G(w, lambda_bar) = g(w) + sum_{j>=2} lambda_j R_j(w) smooth and R1 the
// nonsmooth regularizer described by a RegSpec.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>

#include <Eigen/Core>

#include "bilevel/regularizer.hpp"

namespace bilevel {

class BilevelProblem {
 public:
  explicit BilevelProblem(RegSpec spec) : spec_(std::move(spec)) {}
  virtual ~BilevelProblem() = default;

  /// Dimension n of w.
  virtual int dim() const = 0;
  /// Number r of hyperparameters (lambda has length r, lambda_bar r - 1).
  virtual int num_hyper() const = 0;

  const RegSpec& reg_spec() const { return spec_; }

  virtual double upper(const Eigen::VectorXd& w) const = 0;
  virtual Eigen::VectorXd upper_grad(const Eigen::VectorXd& w) const = 0;
  virtual Eigen::MatrixXd upper_hess(const Eigen::VectorXd& w) const = 0;

  virtual double lower(const Eigen::VectorXd& w, const Eigen::VectorXd& lambda_bar) const = 0;
  virtual Eigen::VectorXd lower_grad(const Eigen::VectorXd& w,
                                     const Eigen::VectorXd& lambda_bar) const = 0;
  /// Symmetric n x n.
  virtual Eigen::MatrixXd lower_hess(const Eigen::VectorXd& w,
                                     const Eigen::VectorXd& lambda_bar) const = 0;

  // Smooth regularizers R_j, j = 2..r, addressed by j - 2.
  virtual double reg(int j, const Eigen::VectorXd& w) const = 0;
  virtual Eigen::VectorXd reg_grad(int j, const Eigen::VectorXd& w) const = 0;
  virtual Eigen::MatrixXd reg_hess(int j, const Eigen::VectorXd& w) const = 0;

 private:
  RegSpec spec_;
};

/// f = 1/2 |A1 w - b1|^2, g = 1/2 |A2 w - b2|^2, optional R2 = |w|^2.
class ElasticNetProblem final : public BilevelProblem {
 public:
  ElasticNetProblem(Eigen::MatrixXd A1, Eigen::VectorXd b1, Eigen::MatrixXd A2,
                    Eigen::VectorXd b2, RegSpec spec, bool ridge = true);

  int dim() const override { return static_cast<int>(A1_.cols()); }
  int num_hyper() const override { return ridge_ ? 2 : 1; }

  double upper(const Eigen::VectorXd& w) const override;
  Eigen::VectorXd upper_grad(const Eigen::VectorXd& w) const override;
  Eigen::MatrixXd upper_hess(const Eigen::VectorXd& w) const override;

  double lower(const Eigen::VectorXd& w, const Eigen::VectorXd& lambda_bar) const override;
  Eigen::VectorXd lower_grad(const Eigen::VectorXd& w,
                             const Eigen::VectorXd& lambda_bar) const override;
  Eigen::MatrixXd lower_hess(const Eigen::VectorXd& w,
                             const Eigen::VectorXd& lambda_bar) const override;

  double reg(int j, const Eigen::VectorXd& w) const override;
  Eigen::VectorXd reg_grad(int j, const Eigen::VectorXd& w) const override;
  Eigen::MatrixXd reg_hess(int j, const Eigen::VectorXd& w) const override;

 private:
  void check_reg_index(int j) const;

  Eigen::MatrixXd A1_, A2_;
  Eigen::VectorXd b1_, b2_;
  // Cached normal-equation pieces.
  Eigen::MatrixXd Q1_, Q2_;
  Eigen::VectorXd c1_, c2_;
  bool ridge_;
};

/// Throws std::invalid_argument on inconsistent dimensions.
ElasticNetProblem make_elastic_net(Eigen::MatrixXd A1, Eigen::VectorXd b1, Eigen::MatrixXd A2,
                                   Eigen::VectorXd b2, RegSpec spec, bool ridge = true);

struct ElasticNetInstance {
  Eigen::MatrixXd A1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd A2;
  Eigen::VectorXd b2;
  Eigen::VectorXd theta;
  std::uint64_t seed = 0;
  double noise = 0.0;
};

/// Synthetic data: A_i ~ U(0,1), theta = 10 [0; U(0,1)] with floor(n/2) zeros,
/// b1 = A1 theta, b2 = A2 theta + noise (2u - 1). Deterministic in `seed`.
ElasticNetInstance gen_synthetic(int n, int m1, int m2, double noise, std::uint64_t seed);

ElasticNetProblem make_elastic_net(const ElasticNetInstance& inst, RegSpec spec, bool ridge = true);

/// Text format, one value per field, matrices row-major:
///
///   elastic_net_instance v1
///   n,m1,m2,seed,noise
///   A1 (m1 rows), b1 (1 row), A2 (m2 rows), b2 (1 row), theta (1 row)
///
/// each block preceded by its name on its own line; values printed with %.17g.
void write_instance(std::ostream& os, const ElasticNetInstance& inst);
ElasticNetInstance read_instance(std::istream& is);
std::string serialize_instance(const ElasticNetInstance& inst);

}  // namespace bilevel
