#pragma once

#include <Eigen/Dense>

#include "drinfer/data_model.hpp"
#include "drinfer/nuisance.hpp"
#include "drinfer/rng.hpp"

namespace drinfer::testing {

/// Small synthetic dataset with a smooth outcome surface; not one of the
/// simulation settings, just enough structure for algebraic identity checks.
inline ObservationSet toy_data(int n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd w(n, 2);
  Eigen::VectorXd a(n), y(n);
  for (int i = 0; i < n; ++i) {
    w(i, 0) = rng.normal();
    w(i, 1) = rng.normal();
    a[i] = rng.uniform(-1.0, 1.0);
    y[i] = w(i, 0) - 0.5 * w(i, 1) * a[i] + 0.3 * a[i] + rng.normal();
  }
  return ObservationSet::from_raw(std::move(w), std::move(a), std::move(y));
}

inline NuisanceFit toy_fit(const ObservationSet& data) {
  NuisanceFit fit;
  const RidgeLearner learner;
  fit.q = fit_conditional_mean(data, learner, 5, FeatureConfig{});
  fit.g = fit_conditional_density(data, DensityConfig{});
  return fit;
}

/// Random symmetric positive-definite matrix with unit-scale eigenvalues.
inline Eigen::MatrixXd random_spd(int d, Rng& rng) {
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) m(i, j) = rng.normal();
  }
  Eigen::MatrixXd spd = m * m.transpose() / d;
  spd.diagonal().array() += 0.1;
  return spd;
}

}  // namespace drinfer::testing
