#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace drinfer {

/// Observed sample (W, A, Y) with the exposure rescaled to [0,1].
struct ObservationSet {
  Eigen::MatrixXd w;    // n x q covariates
  Eigen::VectorXd a;    // exposure, original units
  Eigen::VectorXd y;    // outcome
  double a_min = 0.0;
  double a_max = 0.0;
  Eigen::VectorXd a01;  // exposure rescaled to [0,1]

  int n() const { return static_cast<int>(a.size()); }
  int q() const { return static_cast<int>(w.cols()); }

  /// Validates finiteness and sample size, computes the rescaled exposure.
  static ObservationSet from_raw(Eigen::MatrixXd w, Eigen::VectorXd a,
                                 Eigen::VectorXd y);
};

/// Affine min-max map to the basis domain. Values outside [a_min, a_max]
/// map outside [0,1]; when `out_of_range` is non-null it is set accordingly.
double rescale_to_unit(double a, double a_min, double a_max,
                       bool* out_of_range = nullptr);

/// Inverse of rescale_to_unit.
double rescale_from_unit(double a01, double a_min, double a_max);

ObservationSet load_csv(const std::string& path,
                        const std::vector<std::string>& covariate_columns,
                        const std::string& exposure_column,
                        const std::string& outcome_column);

void write_csv(const ObservationSet& data, const std::string& path,
               const std::vector<std::string>& covariate_columns,
               const std::string& exposure_column,
               const std::string& outcome_column);

/// Candidate null curve theta* on the rescaled exposure scale.
class NullCurve {
 public:
  static NullCurve zero();
  /// c0 + sum_d c_d eta_d in the Sobolev basis of dimension coeffs.size().
  static NullCurve from_coefficients(Eigen::VectorXd coeffs,
                                     double intercept = 0.0);
  static NullCurve from_function(std::function<double(double)> f);

  double operator()(double a01) const { return eval_(a01); }
  bool is_zero() const { return is_zero_; }
  /// Coefficients when constructed from a basis expansion, empty otherwise.
  const Eigen::VectorXd& coefficients() const { return coeffs_; }

 private:
  NullCurve() = default;
  std::function<double(double)> eval_;
  Eigen::VectorXd coeffs_;
  bool is_zero_ = false;
};

}  // namespace drinfer
