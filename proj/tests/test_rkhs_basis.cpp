#include <doctest.h>

#include <cmath>

#include "drinfer/quadrature.hpp"
#include "drinfer/rkhs_basis.hpp"
#include "drinfer/rng.hpp"

using namespace drinfer;

TEST_CASE("basis values and eigenvalues") {
  const SobolevBasis basis(4);
  // eta_1 = sqrt(2) cos(2 pi a), eta_2 = sqrt(2) sin(2 pi a)
  CHECK(basis.evaluate(0.0)[0] == doctest::Approx(std::sqrt(2.0)));
  CHECK(basis.evaluate(0.0)[1] == doctest::Approx(0.0));
  CHECK(basis.evaluate(0.25)[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(basis.evaluate(0.25)[1] == doctest::Approx(std::sqrt(2.0)));
  // pair structure of the eigenvalues
  const double g1 = std::pow(2.0 * M_PI, -4.0);
  CHECK(basis.eigenvalue(1) == doctest::Approx(g1));
  CHECK(basis.eigenvalue(2) == doctest::Approx(g1));
  CHECK(basis.eigenvalue(3) == doctest::Approx(std::pow(4.0 * M_PI, -4.0)));
  CHECK_THROWS_AS(basis.eigenvalue(5), std::out_of_range);
  CHECK_THROWS_AS(SobolevBasis(0), std::invalid_argument);
}

TEST_CASE("orthonormality over the uniform measure by quadrature") {
  const SobolevBasis basis(10);
  for (int d1 = 1; d1 <= 10; ++d1) {
    for (int d2 = d1; d2 <= 10; ++d2) {
      const double ip = integrate(
          [&](double a) {
            const Eigen::VectorXd e = basis.evaluate(a);
            return e[d1 - 1] * e[d2 - 1];
          },
          0.0, 1.0, 128);
      CHECK(ip == doctest::Approx(d1 == d2 ? 1.0 : 0.0).epsilon(1e-10));
      // zero mean of every basis function
    }
    const double mean =
        integrate([&](double a) { return basis.evaluate(a)[d1 - 1]; }, 0.0,
                  1.0, 128);
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("roughness J in the eigenbasis") {
  const SobolevBasis basis(4);
  BasisFunction f;
  f.coeffs = Eigen::VectorXd::Zero(4);
  f.coeffs[0] = 2.0;
  f.coeffs[3] = -1.0;
  f.intercept = 5.0;  // intercept excluded from J
  const double expected =
      4.0 * std::pow(2.0 * M_PI, 4.0) + std::pow(4.0 * M_PI, 4.0);
  CHECK(roughness(f, basis) == doctest::Approx(expected));

  // J matches the quadrature of the squared second derivative
  const double quad = integrate(
      [&](double a) {
        // second derivative of 2 eta_1 - eta_4
        const double d2_eta1 =
            -std::sqrt(2.0) * std::pow(2.0 * M_PI, 2.0) *
            std::cos(2.0 * M_PI * a);
        const double d2_eta4 = -std::sqrt(2.0) * std::pow(4.0 * M_PI, 2.0) *
                               std::sin(4.0 * M_PI * a);
        const double dd = 2.0 * d2_eta1 - d2_eta4;
        return dd * dd;
      },
      0.0, 1.0, 128);
  CHECK(roughness(f, basis) == doctest::Approx(quad).epsilon(1e-10));
}

TEST_CASE("gram matrices match the brute-force covariance") {
  Rng rng(11);
  const int n = 40;
  Eigen::VectorXd a01(n);
  for (int i = 0; i < n; ++i) a01[i] = rng.uniform();
  const SobolevBasis basis(6);
  const GramMatrices gm = gram_matrices(basis, a01);

  CHECK(gm.v.rows() == 6);
  CHECK((gm.v - gm.v.transpose()).cwiseAbs().maxCoeff() == 0.0);
  for (int d1 = 0; d1 < 6; ++d1) {
    for (int d2 = 0; d2 < 6; ++d2) {
      double m1 = 0.0, m2 = 0.0, cross = 0.0;
      for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd e = basis.evaluate(a01[i]);
        m1 += e[d1] / n;
        m2 += e[d2] / n;
        cross += e[d1] * e[d2] / n;
      }
      CHECK(gm.v(d1, d2) == doctest::Approx(cross - m1 * m2).epsilon(1e-10));
    }
  }
  // V is positive semidefinite
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gm.v);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-12);
}

TEST_CASE("class membership check") {
  Rng rng(3);
  const int n = 60;
  Eigen::VectorXd a01(n);
  for (int i = 0; i < n; ++i) a01[i] = rng.uniform();
  const SobolevBasis basis(4);
  const GramMatrices gm = gram_matrices(basis, a01);
  FunctionClassSpec spec{basis, 1e6, gm.v, gm.gamma_inv};

  Eigen::VectorXd c = Eigen::VectorXd::Zero(4);
  c[0] = 1.0;
  c /= std::sqrt(c.dot(spec.v * c));
  const MembershipCheck ok = project_membership(c, spec);
  CHECK(ok.member);
  CHECK(ok.variance == doctest::Approx(1.0));
  const MembershipCheck too_rough =
      project_membership(c, FunctionClassSpec{basis, 1.0, gm.v, gm.gamma_inv});
  CHECK_FALSE(too_rough.member);
  const MembershipCheck wrong_scale = project_membership(2.0 * c, spec);
  CHECK_FALSE(wrong_scale.member);
}
