#pragma once

#include <Eigen/Dense>

namespace drinfer {

/// Truncated eigenbasis of the second-order Sobolev space on [0,1]:
/// eta_{2d-1}(a) = sqrt(2) cos(2 pi d a), eta_{2d}(a) = sqrt(2) sin(2 pi d a),
/// with eigenvalues gamma_{2d-1} = gamma_{2d} = (2 pi d)^{-4}.
class SobolevBasis {
 public:
  explicit SobolevBasis(int dim);

  int dim() const { return dim_; }

  /// gamma_d for the 1-based index d in 1..dim().
  double eigenvalue(int d) const;

  /// Vector of all eigenvalues gamma_1..gamma_D.
  const Eigen::VectorXd& eigenvalues() const { return gamma_; }

  /// Diagonal of Gamma = diag(1/gamma_1, ..., 1/gamma_D).
  const Eigen::VectorXd& gamma_inverse() const { return gamma_inv_; }

  /// (eta_1(a), ..., eta_D(a)). Inputs outside [0,1] extend periodically.
  Eigen::VectorXd evaluate(double a01) const;

  /// n x D matrix of basis evaluations.
  Eigen::MatrixXd evaluate_all(const Eigen::VectorXd& a01) const;

 private:
  int dim_;
  Eigen::VectorXd gamma_;
  Eigen::VectorXd gamma_inv_;
};

/// Function c_0 + sum_d c_d eta_d in the span of a SobolevBasis.
struct BasisFunction {
  Eigen::VectorXd coeffs;
  double intercept = 0.0;

  double operator()(double a01, const SobolevBasis& basis) const {
    return intercept + basis.evaluate(a01).dot(coeffs);
  }
};

/// RKHS roughness J(f) = sum_d c_d^2 / gamma_d; the intercept is excluded.
double roughness(const BasisFunction& f, const SobolevBasis& basis);

struct GramMatrices {
  Eigen::MatrixXd v;           // empirical covariance of basis evaluations
  Eigen::VectorXd gamma_inv;   // diagonal of Gamma
};

/// V[d1][d2] = (1/n) sum_i (eta_d1(A_i) - mean)(eta_d2(A_i) - mean);
/// Gamma = diag(1/gamma_d). V is symmetrized exactly.
GramMatrices gram_matrices(const SobolevBasis& basis,
                           const Eigen::VectorXd& a01);

/// The class H_kappa: unit empirical variance, roughness at most kappa.
struct FunctionClassSpec {
  SobolevBasis basis;
  double kappa;
  Eigen::MatrixXd v;
  Eigen::VectorXd gamma_inv;
};

struct MembershipCheck {
  bool member;
  double variance;   // c' V c
  double roughness;  // c' Gamma c
};

MembershipCheck project_membership(const Eigen::VectorXd& c,
                                   const FunctionClassSpec& spec);

}  // namespace drinfer
