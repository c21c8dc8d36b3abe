#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "drinfer/data_model.hpp"
#include "drinfer/rkhs_basis.hpp"

namespace drinfer {

/// Feature expansion used by the default conditional-mean learner:
/// tensor of exposure terms (polynomial in a01, optionally leading Sobolev
/// eigenfunctions) with covariate monomials of bounded total degree.
struct FeatureConfig {
  int exposure_degree = 2;
  int basis_terms = 0;
  int covariate_degree = 3;
};

/// Exposure feature row (a01, a01^2, ..., eta_1(a01), ...), no intercept.
Eigen::RowVectorXd exposure_features(double a01, const FeatureConfig& cfg);
/// Covariate monomials of total degree 1..covariate_degree, no intercept.
Eigen::RowVectorXd covariate_features(const Eigen::RowVectorXd& w,
                                      const FeatureConfig& cfg);
int exposure_feature_count(const FeatureConfig& cfg);
int covariate_feature_count(int q, const FeatureConfig& cfg);

/// Pluggable regression slot. fit() selects hyperparameters by K-fold
/// cross-validation over the learner's grid and returns coefficients for
/// the supplied design matrix.
class RegressionLearner {
 public:
  virtual ~RegressionLearner() = default;
  virtual Eigen::VectorXd fit(const Eigen::MatrixXd& x,
                              const Eigen::VectorXd& y, int folds) const = 0;
};

/// Ridge regression with CV over a lambda grid and a one-SE selection rule
/// (largest lambda whose CV error is within se_multiplier standard errors
/// of the minimum).
class RidgeLearner : public RegressionLearner {
 public:
  std::vector<double> lambda_grid;
  double se_multiplier = 1.0;

  RidgeLearner();
  Eigen::VectorXd fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                      int folds) const override;
};

/// Fitted conditional mean Q_n(w, a01), bilinear in the exposure and
/// covariate feature blocks.
class ConditionalMean {
 public:
  double predict(const Eigen::RowVectorXd& w, double a01) const;
  /// Pointwise predictions Q(W_i, a01_i).
  Eigen::VectorXd predict_at(const ObservationSet& data) const;
  /// Cross matrix with entry (i, k) = Q(W_i, a01[k]).
  Eigen::MatrixXd cross_matrix(const Eigen::MatrixXd& w,
                               const Eigen::VectorXd& a01) const;

  FeatureConfig cfg;
  Eigen::MatrixXd b;  // (1 + exposure features) x (1 + covariate features)
};

ConditionalMean fit_conditional_mean(const ObservationSet& data,
                                     const RegressionLearner& learner,
                                     int folds,
                                     const FeatureConfig& cfg = {});

struct DensityConfig {
  int grid_size = 51;
  std::vector<double> bandwidths = {0.03, 0.05, 0.08, 0.12, 0.18, 0.25};
  double g_floor = 0.01;
  int covariate_degree = 3;
  int folds = 5;
  /// Full conditional cross-validation of the bandwidth (slow path); the
  /// default selects the bandwidth by marginal-KDE cross-validation.
  bool full_conditional_cv = false;
};

/// Conditional exposure density on the a01 scale: per-grid-point log-link
/// fits of the kernel-smoothed target, linear interpolation in between,
/// floored at g_floor.
class ConditionalDensity {
 public:
  double density(const Eigen::RowVectorXd& w, double a01) const;
  /// Matrix with entry (i, k) = g(a01[k] | W_i), floored.
  Eigen::MatrixXd density_matrix(const Eigen::MatrixXd& w,
                                 const Eigen::VectorXd& a01) const;

  double bandwidth() const { return bandwidth_; }
  double floor() const { return floor_; }
  const Eigen::VectorXd& grid() const { return grid_; }

  Eigen::VectorXd grid_;
  Eigen::MatrixXd coefs_;  // grid_size x (1 + covariate features)
  FeatureConfig wcfg_;
  double bandwidth_ = 0.0;
  double floor_ = 0.01;
};

ConditionalDensity fit_conditional_density(const ObservationSet& data,
                                           const DensityConfig& cfg = {});

/// Marginal-KDE bandwidth selection by K-fold CV log-likelihood, with a
/// boundary-corrected Gaussian kernel on [0,1].
double select_marginal_bandwidth(const Eigen::VectorXd& a01,
                                 const std::vector<double>& bandwidths,
                                 int folds);

struct NuisanceFit {
  ConditionalMean q;
  ConditionalDensity g;
};

/// weight_i = [(1/n) sum_j g(A01_i | W_j)] / max(g(A01_i | W_i), floor).
Eigen::VectorXd stability_weights(const NuisanceFit& fit,
                                  const ObservationSet& data,
                                  int* floored_count = nullptr);

/// Plug-in dose-response curve theta_n(a01) = (1/n) sum_i Q_n(W_i, a01).
class PluginCurve {
 public:
  double operator()(double a01) const;
  const Eigen::VectorXd& grid() const { return grid_; }
  const Eigen::VectorXd& values() const { return values_; }

  FeatureConfig cfg_;
  Eigen::VectorXd bvec_;  // B * mean covariate feature row
  Eigen::VectorXd grid_;
  Eigen::VectorXd values_;
};

PluginCurve plugin_curve(const ConditionalMean& q, const ObservationSet& data,
                         int grid_size = 201);

}  // namespace drinfer
