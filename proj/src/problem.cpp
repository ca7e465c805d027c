#include "bilevel/problem.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "bilevel/rng.hpp"

namespace bilevel {

namespace {

// A^T A, exactly symmetric.
Eigen::MatrixXd gram(const Eigen::MatrixXd& A) {
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(A.cols(), A.cols());
  Q.selfadjointView<Eigen::Lower>().rankUpdate(A.transpose());
  return Q.selfadjointView<Eigen::Lower>();
}

}  // namespace

ElasticNetProblem::ElasticNetProblem(Eigen::MatrixXd A1, Eigen::VectorXd b1, Eigen::MatrixXd A2,
                                     Eigen::VectorXd b2, RegSpec spec, bool ridge)
    : BilevelProblem(std::move(spec)),
      A1_(std::move(A1)),
      A2_(std::move(A2)),
      b1_(std::move(b1)),
      b2_(std::move(b2)),
      ridge_(ridge) {
  if (A1_.cols() == 0) throw std::invalid_argument("elastic net: n must be positive");
  if (A1_.cols() != A2_.cols()) {
    throw std::invalid_argument("elastic net: A1 and A2 must have the same number of columns");
  }
  if (A1_.rows() != b1_.size()) throw std::invalid_argument("elastic net: rows(A1) != size(b1)");
  if (A2_.rows() != b2_.size()) throw std::invalid_argument("elastic net: rows(A2) != size(b2)");
  Q1_ = gram(A1_);
  Q2_ = gram(A2_);
  c1_ = A1_.transpose() * b1_;
  c2_ = A2_.transpose() * b2_;
}

void ElasticNetProblem::check_reg_index(int j) const {
  if (!ridge_ || j != 0) throw std::out_of_range("elastic net: no smooth regularizer " + std::to_string(j + 2));
}

double ElasticNetProblem::upper(const Eigen::VectorXd& w) const {
  return 0.5 * (A1_ * w - b1_).squaredNorm();
}

Eigen::VectorXd ElasticNetProblem::upper_grad(const Eigen::VectorXd& w) const {
  return Q1_ * w - c1_;
}

Eigen::MatrixXd ElasticNetProblem::upper_hess(const Eigen::VectorXd&) const { return Q1_; }

double ElasticNetProblem::lower(const Eigen::VectorXd& w, const Eigen::VectorXd& lambda_bar) const {
  double v = 0.5 * (A2_ * w - b2_).squaredNorm();
  if (ridge_) v += lambda_bar[0] * w.squaredNorm();
  return v;
}

Eigen::VectorXd ElasticNetProblem::lower_grad(const Eigen::VectorXd& w,
                                              const Eigen::VectorXd& lambda_bar) const {
  Eigen::VectorXd g = Q2_ * w - c2_;
  if (ridge_) g += 2.0 * lambda_bar[0] * w;
  return g;
}

Eigen::MatrixXd ElasticNetProblem::lower_hess(const Eigen::VectorXd&,
                                              const Eigen::VectorXd& lambda_bar) const {
  Eigen::MatrixXd H = Q2_;
  if (ridge_) H.diagonal().array() += 2.0 * lambda_bar[0];
  return H;
}

double ElasticNetProblem::reg(int j, const Eigen::VectorXd& w) const {
  check_reg_index(j);
  return w.squaredNorm();
}

Eigen::VectorXd ElasticNetProblem::reg_grad(int j, const Eigen::VectorXd& w) const {
  check_reg_index(j);
  return 2.0 * w;
}

Eigen::MatrixXd ElasticNetProblem::reg_hess(int j, const Eigen::VectorXd& w) const {
  check_reg_index(j);
  return 2.0 * Eigen::MatrixXd::Identity(w.size(), w.size());
}

ElasticNetProblem make_elastic_net(Eigen::MatrixXd A1, Eigen::VectorXd b1, Eigen::MatrixXd A2,
                                   Eigen::VectorXd b2, RegSpec spec, bool ridge) {
  return ElasticNetProblem(std::move(A1), std::move(b1), std::move(A2), std::move(b2),
                           std::move(spec), ridge);
}

ElasticNetProblem make_elastic_net(const ElasticNetInstance& inst, RegSpec spec, bool ridge) {
  return ElasticNetProblem(inst.A1, inst.b1, inst.A2, inst.b2, std::move(spec), ridge);
}

ElasticNetInstance gen_synthetic(int n, int m1, int m2, double noise, std::uint64_t seed) {
  if (n < 1 || m1 < 1 || m2 < 1) {
    throw std::invalid_argument("gen_synthetic: n, m1, m2 must be >= 1");
  }
  Xoshiro256 rng(seed);
  ElasticNetInstance inst;
  inst.seed = seed;
  inst.noise = noise;

  // Column-major fill, as rand(m, n) does.
  inst.A1.resize(m1, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < m1; ++i) inst.A1(i, j) = rng.uniform();
  inst.A2.resize(m2, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < m2; ++i) inst.A2(i, j) = rng.uniform();

  const int zeros = n / 2;
  inst.theta = Eigen::VectorXd::Zero(n);
  for (int j = zeros; j < n; ++j) inst.theta[j] = 10.0 * rng.uniform();

  inst.b1 = inst.A1 * inst.theta;
  inst.b2 = inst.A2 * inst.theta;
  for (int i = 0; i < m2; ++i) inst.b2[i] += noise * (2.0 * rng.uniform() - 1.0);
  return inst;
}

namespace {

void write_row(std::ostream& os, const double* data, Eigen::Index count, Eigen::Index stride) {
  char buf[32];
  for (Eigen::Index k = 0; k < count; ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", data[k * stride]);
    if (k) os << ',';
    os << buf;
  }
  os << '\n';
}

void write_matrix(std::ostream& os, const char* name, const Eigen::MatrixXd& M) {
  os << name << '\n';
  for (Eigen::Index i = 0; i < M.rows(); ++i) write_row(os, M.data() + i, M.cols(), M.rows());
}

void write_vector(std::ostream& os, const char* name, const Eigen::VectorXd& v) {
  os << name << '\n';
  write_row(os, v.data(), v.size(), 1);
}

std::vector<double> parse_row(const std::string& line, Eigen::Index expected) {
  std::vector<double> vals;
  std::istringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
  if (static_cast<Eigen::Index>(vals.size()) != expected) {
    throw std::runtime_error("instance file: expected " + std::to_string(expected) +
                             " values, found " + std::to_string(vals.size()));
  }
  return vals;
}

std::string next_line(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("instance file: unexpected end of input");
  return line;
}

void expect_tag(std::istream& is, const char* tag) {
  const std::string line = next_line(is);
  if (line != tag) throw std::runtime_error(std::string("instance file: expected '") + tag + "'");
}

Eigen::MatrixXd read_matrix(std::istream& is, const char* name, Eigen::Index rows, Eigen::Index cols) {
  expect_tag(is, name);
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto vals = parse_row(next_line(is), cols);
    for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = vals[static_cast<std::size_t>(j)];
  }
  return M;
}

Eigen::VectorXd read_vector(std::istream& is, const char* name, Eigen::Index size) {
  expect_tag(is, name);
  const auto vals = parse_row(next_line(is), size);
  return Eigen::Map<const Eigen::VectorXd>(vals.data(), size);
}

}  // namespace

void write_instance(std::ostream& os, const ElasticNetInstance& inst) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", inst.noise);
  os << "elastic_net_instance v1\n";
  os << inst.A1.cols() << ',' << inst.A1.rows() << ',' << inst.A2.rows() << ',' << inst.seed << ','
     << buf << '\n';
  write_matrix(os, "A1", inst.A1);
  write_vector(os, "b1", inst.b1);
  write_matrix(os, "A2", inst.A2);
  write_vector(os, "b2", inst.b2);
  write_vector(os, "theta", inst.theta);
}

ElasticNetInstance read_instance(std::istream& is) {
  expect_tag(is, "elastic_net_instance v1");
  std::istringstream header(next_line(is));
  std::string cell;
  std::vector<std::string> fields;
  while (std::getline(header, cell, ',')) fields.push_back(cell);
  if (fields.size() != 5) throw std::runtime_error("instance file: malformed header");

  ElasticNetInstance inst;
  const Eigen::Index n = std::stol(fields[0]);
  const Eigen::Index m1 = std::stol(fields[1]);
  const Eigen::Index m2 = std::stol(fields[2]);
  inst.seed = std::stoull(fields[3]);
  inst.noise = std::stod(fields[4]);
  inst.A1 = read_matrix(is, "A1", m1, n);
  inst.b1 = read_vector(is, "b1", m1);
  inst.A2 = read_matrix(is, "A2", m2, n);
  inst.b2 = read_vector(is, "b2", m2);
  inst.theta = read_vector(is, "theta", n);
  return inst;
}

std::string serialize_instance(const ElasticNetInstance& inst) {
  std::ostringstream os;
  write_instance(os, inst);
  return os.str();
}

}  // namespace bilevel
