#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "drinfer/data_model.hpp"
#include "drinfer/eif_estimators.hpp"
#include "drinfer/sup_test.hpp"

namespace drinfer {

/// Data-adaptive kappa: ridge fit of the doubly robust pseudo-outcome on
/// the basis, penalized by the RKHS norm, lambda by K-fold CV with the
/// one-standard-error rule.
struct KappaSelection {
  double kappa = 0.0;
  Eigen::VectorXd h_coeffs;  // unit empirical variance direction
  Eigen::VectorXd c_raw;     // ridge coefficients before normalization
  double intercept = 0.0;
  double lambda = 0.0;
  double j_raw = 0.0;        // RKHS roughness of the raw ridge fit
  // roughness of the fit at the CV-minimizing lambda (no one-SE rule):
  // the one-SE fit is deliberately over-smoothed, which is fine for kappa
  // (power only) but badly underestimates the roughness of theta_0 that
  // the band's nu default must upper-bound
  double j_min = 0.0;
  double lambda_min = 0.0;
  bool degenerate = false;   // fallback kappa = (2 pi)^4 / Var_n(eta_1(A))
};

KappaSelection select_kappa(const EifContext& ctx, int folds = 5,
                            std::vector<double> lambda_grid = {});

/// Empirical (1 - alpha) quantile of the bootstrap samples, type-7
/// interpolation.
double critical_value(const BootstrapDistribution& boot, double alpha);

struct BandPoint {
  double lower = 0.0;
  double upper = 0.0;
  bool feasible = true;
  double kkt_residual = 0.0;  // certified stationarity residual
  Eigen::VectorXd c_lower;    // extremizing coefficient vectors
  Eigen::VectorXd c_upper;
};

/// Band limits at one grid point: extremize sum_d c_d (eta_d(a0) - mean)
/// over the curves c with RKHS norm at most nu whose fixed-(lambda1,
/// lambda2) closed-form statistic is at most tau. Interior-point solve
/// with KKT-residual certification.
BandPoint band_at(const Eigen::VectorXd& eta0_c, const Eigen::VectorXd& u0,
                  const Eigen::MatrixXd& v, const Eigen::VectorXd& gamma_inv,
                  double nu, double lambda1, double lambda2, double tau);

struct BandConfig {
  double alpha = 0.05;
  int grid_size = 101;
  int basis_dim = 20;
  EstimatorKind kind = EstimatorKind::one_step;
  int bootstrap_m = 2000;
  std::uint64_t seed = 0;
  int cv_folds = 5;
  double kappa = 0.0;  // <= 0: data-adaptive via select_kappa
  double nu = -1.0;    // < 0: 4 x roughness of the ridge fit of theta_0
  int threads = 1;
  FeatureConfig q_features;
  DensityConfig density;
  TmlOptions tml;
  bool audit_exact_statistic = false;
};

struct BandResult {
  Eigen::VectorXd a;      // grid, original exposure units
  Eigen::VectorXd a01;    // grid, rescaled
  Eigen::VectorXd lower;  // centered-curve scale
  Eigen::VectorXd upper;
  std::vector<bool> feasible;
  double alpha = 0.0;
  double kappa = 0.0;
  bool kappa_degenerate = false;
  double nu = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double tstar = 0.0;
  std::uint64_t seed = 0;
  Eigen::VectorXd audit_gap;  // empty unless audit_exact_statistic
};

/// Test inversion: one shared null-mode bootstrap calibrates tau; lambda1
/// and lambda2 are fixed from the theta* = 0 solve; band_at runs over an
/// equispaced grid on the observed exposure range.
BandResult build_band(const ObservationSet& data, const BandConfig& config,
                      const NuisanceFit* prefit = nullptr);

}  // namespace drinfer
