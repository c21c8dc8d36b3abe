#pragma once

#include <functional>
#include <vector>

namespace drinfer {

struct QuadratureRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;  // sum to 2
};

/// Gauss-Legendre rule with `order` nodes.
QuadratureRule gauss_legendre(int order);

/// Integral of f over [lo, hi] with a Gauss-Legendre rule.
double integrate(const std::function<double(double)>& f, double lo, double hi,
                 int order = 128);

}  // namespace drinfer
