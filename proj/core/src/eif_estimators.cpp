#include "drinfer/eif_estimators.hpp"

#include <cmath>
#include <stdexcept>

#include "drinfer/sup_test.hpp"

namespace drinfer {

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::plugin: return "plugin";
    case EstimatorKind::one_step: return "one_step";
    case EstimatorKind::tml: return "tml";
  }
  return "unknown";
}

EifContext::EifContext(const ObservationSet& data, const NuisanceFit& fit,
                       const NullCurve& null_curve, int basis_dim)
    : basis(basis_dim) {
  const int nn = data.n();
  eta = basis.evaluate_all(data.a01);
  eta_mean = eta.colwise().mean();
  eta_c = eta.rowwise() - eta_mean;
  v = eta_c.transpose() * eta_c / nn;
  v = 0.5 * (v + v.transpose()).eval();
  gamma_inv = basis.gamma_inverse();

  qcross = fit.q.cross_matrix(data.w, data.a01);
  qat = qcross.diagonal();
  y = data.y;
  res = y - qat;
  theta = qcross.colwise().mean();
  thetastar.resize(nn);
  for (int k = 0; k < nn; ++k) thetastar[k] = null_curve(data.a01[k]);

  const Eigen::MatrixXd dens = fit.g.density_matrix(data.w, data.a01);
  const Eigen::RowVectorXd gbar = dens.colwise().mean();
  const double floor = fit.g.floor();
  weights.resize(nn);
  mratio.resize(nn);
  floored = 0;
  for (int k = 0; k < nn; ++k) {
    double inv_sum = 0.0;
    for (int i = 0; i < nn; ++i) {
      inv_sum += 1.0 / std::max(dens(i, k), floor);
    }
    mratio[k] = gbar[k] * inv_sum / nn;
    if (dens(k, k) <= floor) ++floored;
    weights[k] = gbar[k] / std::max(dens(k, k), floor);
  }
  znb = weights.asDiagonal() * eta_c;
}

PsiVector psi_plugin(const EifContext& ctx) {
  PsiVector out;
  out.kind = EstimatorKind::plugin;
  out.u = ctx.eta_c.transpose() * (ctx.theta - ctx.thetastar) / ctx.n();
  return out;
}

PsiVector psi_one_step(const EifContext& ctx) {
  PsiVector out = psi_plugin(ctx);
  out.kind = EstimatorKind::one_step;
  out.u += ctx.znb.transpose() * ctx.res / ctx.n();
  return out;
}

EifMatrix eif_evaluate(const EifContext& ctx, bool null_mode) {
  const int nn = ctx.n();
  EifMatrix out;
  out.null_mode = null_mode;
  // weighted residual line plus the W-marginalization line
  out.phi = ctx.res.asDiagonal() * ctx.znb;
  const Eigen::MatrixXd term3 = ctx.qcross * ctx.eta_c / nn;
  out.phi += term3;
  const Eigen::RowVectorXd t = term3.colwise().mean();
  if (null_mode) {
    out.phi.rowwise() -= t;
  } else {
    const Eigen::VectorXd diff = ctx.theta - ctx.thetastar;
    out.phi += diff.asDiagonal() * ctx.eta_c;
    const Eigen::RowVectorXd tstar =
        (ctx.eta_c.transpose() * ctx.thetastar / nn).transpose();
    out.phi.rowwise() -= 2.0 * t - tstar;
  }
  return out;
}

TmlUpdate tml_update(const EifContext& ctx, double kappa,
                     const Eigen::VectorXd& h_ref_coeffs,
                     const TmlOptions& opts) {
  const int nn = ctx.n();
  TmlUpdate up;
  up.epsilon = opts.epsilon;
  if (up.epsilon <= 0.0) {
    const double sd_y =
        std::sqrt((ctx.y.array() - ctx.y.mean()).square().mean());
    up.epsilon = 1e-3 * sd_y;
  }
  if (up.epsilon <= 0.0) {
    throw TmlError("TML step size is zero (constant outcome)", {});
  }
  if (h_ref_coeffs.size() != ctx.dim()) {
    throw TmlError("h_ref coefficient size does not match basis", {});
  }

  // threshold {n log n}^{-1/2} Var_n^{-1/2}({Y - Q_n} Z_n(.; h_ref))
  const Eigen::VectorXd zref =
      ctx.res.array() * (ctx.znb * h_ref_coeffs).array();
  const double var_ref = (zref.array() - zref.mean()).square().mean();
  if (!(var_ref > 0.0)) {
    throw TmlError("degenerate TML threshold: Var_n(res Z_n(h_ref)) = 0", {});
  }
  up.threshold = 1.0 / (std::sqrt(nn * std::log(static_cast<double>(nn))) *
                        std::sqrt(var_ref));

  const QcqpSolver solver(ctx.v, ctx.gamma_inv);
  up.csum = Eigen::VectorXd::Zero(ctx.dim());
  up.qat_tilde = ctx.qat;
  Eigen::VectorXd res_b = ctx.res;
  for (int b = 0; b <= opts.max_steps; ++b) {
    const Eigen::VectorXd u_b = ctx.znb.transpose() * res_b / nn;
    const QcqpSolution sol = solver.solve(u_b, kappa);
    up.dn_trace.push_back(sol.psi);
    if (sol.psi <= up.threshold || sol.degenerate) {
      up.steps = b;
      up.converged = true;
      break;
    }
    if (b == opts.max_steps) break;
    up.directions.push_back(sol.c);
    const Eigen::VectorXd delta = up.epsilon * (ctx.znb * sol.c);
    up.qat_tilde += delta;
    res_b -= delta;
    up.csum += up.epsilon * sol.c;
  }
  if (!up.converged) {
    throw TmlError("TML did not converge within max_steps", up.dn_trace);
  }
  up.theta_tilde =
      ctx.theta.array() + ctx.mratio.array() * (ctx.eta_c * up.csum).array();
  return up;
}

PsiVector psi_tml(const EifContext& ctx, const TmlUpdate& update) {
  PsiVector out;
  out.kind = EstimatorKind::tml;
  out.u =
      ctx.eta_c.transpose() * (update.theta_tilde - ctx.thetastar) / ctx.n();
  out.tml_steps = update.steps;
  out.tml_final_dn = update.dn_trace.back();
  return out;
}

}  // namespace drinfer
