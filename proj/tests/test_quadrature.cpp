#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "drinfer/quadrature.hpp"

using namespace drinfer;

TEST_CASE("Gauss-Legendre nodes and weights") {
  const QuadratureRule rule = gauss_legendre(16);
  REQUIRE(rule.nodes.size() == 16);
  REQUIRE(rule.weights.size() == 16);
  double wsum = 0.0;
  for (std::size_t i = 0; i < rule.weights.size(); ++i) {
    wsum += rule.weights[i];
    CHECK(rule.weights[i] > 0.0);
    CHECK(std::abs(rule.nodes[i]) < 1.0);
    if (i > 0) CHECK(rule.nodes[i] > rule.nodes[i - 1]);
  }
  CHECK(wsum == doctest::Approx(2.0).epsilon(1e-13));
  // symmetry about zero
  for (std::size_t i = 0; i < rule.nodes.size() / 2; ++i) {
    CHECK(rule.nodes[i] ==
          doctest::Approx(-rule.nodes[rule.nodes.size() - 1 - i])
              .epsilon(1e-13));
  }
  CHECK_THROWS_AS(gauss_legendre(0), std::invalid_argument);
}

TEST_CASE("polynomial exactness up to degree 2k - 1") {
  const int order = 8;
  for (int deg = 0; deg <= 2 * order - 1; ++deg) {
    const double got =
        integrate([&](double x) { return std::pow(x, deg); }, 0.0, 1.0, order);
    CHECK(got == doctest::Approx(1.0 / (deg + 1)).epsilon(1e-12));
  }
}

TEST_CASE("known integrals on shifted intervals") {
  CHECK(integrate([](double x) { return std::sin(x); }, 0.0, M_PI, 64) ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK(integrate([](double x) { return std::exp(x); }, -1.0, 2.0, 64) ==
        doctest::Approx(std::exp(2.0) - std::exp(-1.0)).epsilon(1e-12));
  CHECK(integrate([](double x) { return 1.0 / x; }, 1.0, std::exp(1.0), 64) ==
        doctest::Approx(1.0).epsilon(1e-12));
}
