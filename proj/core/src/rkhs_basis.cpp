#include "drinfer/rkhs_basis.hpp"

#include <cmath>
#include <stdexcept>

namespace drinfer {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
}

SobolevBasis::SobolevBasis(int dim) : dim_(dim) {
  if (dim < 1) throw std::invalid_argument("basis dimension must be >= 1");
  gamma_.resize(dim);
  gamma_inv_.resize(dim);
  for (int d = 1; d <= dim; ++d) {
    const int pair = (d + 1) / 2;  // frequency index
    const double w = 2.0 * M_PI * pair;
    gamma_[d - 1] = 1.0 / (w * w * w * w);
    gamma_inv_[d - 1] = w * w * w * w;
  }
}

double SobolevBasis::eigenvalue(int d) const {
  if (d < 1 || d > dim_) throw std::out_of_range("basis index out of range");
  return gamma_[d - 1];
}

Eigen::VectorXd SobolevBasis::evaluate(double a01) const {
  Eigen::VectorXd out(dim_);
  for (int d = 1; d <= dim_; ++d) {
    const int pair = (d + 1) / 2;
    const double arg = 2.0 * M_PI * pair * a01;
    out[d - 1] = (d % 2 == 1) ? kSqrt2 * std::cos(arg) : kSqrt2 * std::sin(arg);
  }
  return out;
}

Eigen::MatrixXd SobolevBasis::evaluate_all(const Eigen::VectorXd& a01) const {
  Eigen::MatrixXd out(a01.size(), dim_);
  for (Eigen::Index i = 0; i < a01.size(); ++i) {
    out.row(i) = evaluate(a01[i]).transpose();
  }
  return out;
}

double roughness(const BasisFunction& f, const SobolevBasis& basis) {
  if (f.coeffs.size() != basis.dim()) {
    throw std::invalid_argument("coefficient size does not match basis");
  }
  return f.coeffs.array().square().matrix().dot(basis.gamma_inverse());
}

GramMatrices gram_matrices(const SobolevBasis& basis,
                           const Eigen::VectorXd& a01) {
  if (a01.size() < 2) throw std::invalid_argument("need at least 2 points");
  const Eigen::MatrixXd e = basis.evaluate_all(a01);
  const Eigen::RowVectorXd mean = e.colwise().mean();
  const Eigen::MatrixXd centered = e.rowwise() - mean;
  Eigen::MatrixXd v =
      centered.transpose() * centered / static_cast<double>(a01.size());
  v = 0.5 * (v + v.transpose()).eval();
  return GramMatrices{std::move(v), basis.gamma_inverse()};
}

MembershipCheck project_membership(const Eigen::VectorXd& c,
                                   const FunctionClassSpec& spec) {
  const double variance = c.dot(spec.v * c);
  const double rough = c.array().square().matrix().dot(spec.gamma_inv);
  const bool member = rough <= spec.kappa * (1.0 + 1e-8) &&
                      std::abs(variance - 1.0) <= 1e-8;
  return MembershipCheck{member, variance, rough};
}

}  // namespace drinfer
