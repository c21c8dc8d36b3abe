#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "drinfer/data_model.hpp"
#include "drinfer/nuisance.hpp"
#include "drinfer/rkhs_basis.hpp"

namespace drinfer {

enum class EstimatorKind { plugin, one_step, tml };

std::string to_string(EstimatorKind kind);

/// D-vector of estimated inner products psi(eta_d) against the centered
/// basis, together with the estimator kind that produced it.
struct PsiVector {
  Eigen::VectorXd u;
  EstimatorKind kind = EstimatorKind::plugin;
  int tml_steps = 0;      // B_n, when kind == tml
  double tml_final_dn = 0.0;

  /// Linearity: psi(sum_d c_d eta_d) = u . c for all three kinds.
  double psi(const Eigen::VectorXd& c) const { return u.dot(c); }
};

/// n x D matrix of estimated efficient influence function values,
/// phi[i][d] = phi_n(O_i; eta_d). In null mode theta* is replaced by the
/// plug-in curve, so the plug-in score line cancels exactly.
struct EifMatrix {
  Eigen::MatrixXd phi;
  bool null_mode = false;
};

/// Per-dataset workspace shared by the estimators, the TML update, and the
/// bootstrap: basis evaluations, Gram matrices, nuisance cross-evaluations,
/// and stability weights, all computed once.
class EifContext {
 public:
  EifContext(const ObservationSet& data, const NuisanceFit& fit,
             const NullCurve& null_curve, int basis_dim);

  int n() const { return static_cast<int>(res.size()); }
  int dim() const { return basis.dim(); }

  SobolevBasis basis;
  Eigen::MatrixXd eta;        // n x D basis evaluations at A01
  Eigen::RowVectorXd eta_mean;
  Eigen::MatrixXd eta_c;      // centered columns
  Eigen::MatrixXd v;          // empirical Gram eta_c' eta_c / n
  Eigen::VectorXd gamma_inv;  // diagonal of Gamma
  Eigen::MatrixXd qcross;     // (i, k) = Q_n(W_i, A01_k)
  Eigen::VectorXd qat;        // Q_n(W_i, A01_i)
  Eigen::VectorXd res;        // Y_i - qat_i
  Eigen::VectorXd theta;      // theta_n(A01_k) = column means of qcross
  Eigen::VectorXd thetastar;  // theta*(A01_k)
  Eigen::VectorXd weights;    // stability weights gbar(A_i)/g(A_i|W_i)
  Eigen::VectorXd y;
  Eigen::MatrixXd znb;        // (i, d) = weights_i * eta_c(i, d)
  /// mratio[k] = (1/n) sum_i gbar(A01_k) / g(A01_k | W_i); the column mean
  /// of the gratio matrix, enough to fluctuate theta without n x n storage.
  Eigen::VectorXd mratio;
  int floored = 0;
};

/// Plug-in inner products: U[d] = (1/n) sum_i (theta(A_i) - theta*(A_i))
/// (eta_d(A_i) - mean eta_d). Centering of the curve difference is implicit
/// because the centered basis columns have exact zero mean.
PsiVector psi_plugin(const EifContext& ctx);

/// One-step: plug-in plus (1/n) sum_i weight_i res_i (eta_d(A_i) - mean).
PsiVector psi_one_step(const EifContext& ctx);

/// Result of the universal least-favorable submodel fluctuation.
struct TmlUpdate {
  double epsilon = 0.0;
  int steps = 0;                    // B_n
  double threshold = 0.0;
  std::vector<double> dn_trace;     // D_n(b eps) for b = 0..B_n
  std::vector<Eigen::VectorXd> directions;  // h_{n,b eps} coefficients
  Eigen::VectorXd csum;             // cumulative eps * sum_b c_b
  Eigen::VectorXd qat_tilde;        // fluctuated Q at the observed points
  Eigen::VectorXd theta_tilde;      // fluctuated plug-in curve at A01_k
  bool converged = false;
};

struct TmlOptions {
  double epsilon = 0.0;  // <= 0 means the default 1e-3 * sd(Y)
  // with the default epsilon, typical n=200 datasets need a few hundred
  // steps to reach the threshold; leave generous headroom
  int max_steps = 5000;
};

class TmlError : public std::runtime_error {
 public:
  TmlError(const std::string& what, std::vector<double> trace)
      : std::runtime_error(what), dn_trace(std::move(trace)) {}
  std::vector<double> dn_trace;
};

/// Iterates Q_{(b+1)eps} = Q_{b eps} + eps Z_n(.,.; h_b) with h_b the QCQP
/// maximizer of the residual moment over H_kappa, until D_n(b eps) falls
/// below {n log n}^{-1/2} Var_n^{-1/2}(res Z_n(.; h_ref)).
TmlUpdate tml_update(const EifContext& ctx, double kappa,
                     const Eigen::VectorXd& h_ref_coeffs,
                     const TmlOptions& opts = {});

/// Plug-in applied to the fluctuated curve theta_tilde.
PsiVector psi_tml(const EifContext& ctx, const TmlUpdate& update);

/// EIF matrix per the influence-function display; null_mode substitutes
/// theta* by theta_n (the plug-in score line cancels).
EifMatrix eif_evaluate(const EifContext& ctx, bool null_mode);

}  // namespace drinfer
