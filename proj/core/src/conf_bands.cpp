#include "drinfer/conf_bands.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace drinfer {

KappaSelection select_kappa(const EifContext& ctx, int folds,
                            std::vector<double> lambda_grid) {
  const int n = ctx.n();
  const int d = ctx.dim();
  if (folds < 2) throw std::invalid_argument("select_kappa needs >= 2 folds");
  if (lambda_grid.empty()) {
    for (int i = 0; i <= 10; ++i) lambda_grid.push_back(std::pow(10.0, i - 10));
  }
  std::sort(lambda_grid.begin(), lambda_grid.end());

  // doubly robust pseudo-outcome for theta_0 - theta*
  const Eigen::VectorXd f =
      ctx.theta + ctx.weights.cwiseProduct(ctx.res) - ctx.thetastar;
  Eigen::MatrixXd x(n, d + 1);
  x.col(0).setOnes();
  x.rightCols(d) = ctx.eta;
  Eigen::VectorXd pen(d + 1);
  pen[0] = 0.0;  // intercept unpenalized
  pen.tail(d) = ctx.gamma_inv;

  const int nl = static_cast<int>(lambda_grid.size());
  Eigen::MatrixXd cv(folds, nl);
  for (int fold = 0; fold < folds; ++fold) {
    int ntr = 0;
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d + 1, d + 1);
    Eigen::VectorXd xtf = Eigen::VectorXd::Zero(d + 1);
    for (int i = 0; i < n; ++i) {
      if (i % folds == fold) continue;
      gram.noalias() += x.row(i).transpose() * x.row(i);
      xtf.noalias() += x.row(i).transpose() * f[i];
      ++ntr;
    }
    gram /= ntr;
    xtf /= ntr;
    for (int j = 0; j < nl; ++j) {
      Eigen::MatrixXd reg = gram;
      reg.diagonal() += lambda_grid[j] * pen;
      const Eigen::VectorXd beta = reg.ldlt().solve(xtf);
      double err = 0.0;
      int nte = 0;
      for (int i = 0; i < n; ++i) {
        if (i % folds != fold) continue;
        const double r = f[i] - x.row(i).dot(beta);
        err += r * r;
        ++nte;
      }
      cv(fold, j) = err / nte;
    }
  }
  const Eigen::VectorXd mean_cv = cv.colwise().mean();
  int jmin = 0;
  mean_cv.minCoeff(&jmin);
  const Eigen::VectorXd centered = cv.col(jmin).array() - mean_cv[jmin];
  const double se =
      std::sqrt(centered.squaredNorm() / (folds - 1)) / std::sqrt(folds);
  int jsel = jmin;
  for (int j = nl - 1; j >= 0; --j) {
    if (mean_cv[j] <= mean_cv[jmin] + se) {
      jsel = j;
      break;
    }
  }

  const Eigen::MatrixXd gram0 = x.transpose() * x / n;
  const Eigen::VectorXd xtf_full = x.transpose() * f / n;
  const auto fit_at = [&](double lambda) {
    Eigen::MatrixXd gram = gram0;
    gram.diagonal() += lambda * pen;
    return Eigen::VectorXd(gram.ldlt().solve(xtf_full));
  };
  const Eigen::VectorXd beta = fit_at(lambda_grid[jsel]);

  KappaSelection sel;
  sel.lambda = lambda_grid[jsel];
  sel.lambda_min = lambda_grid[jmin];
  {
    const Eigen::VectorXd beta_min = fit_at(lambda_grid[jmin]);
    sel.j_min = beta_min.tail(d).array().square().matrix().dot(ctx.gamma_inv);
  }
  sel.intercept = beta[0];
  sel.c_raw = beta.tail(d);
  const double varc = sel.c_raw.dot(ctx.v * sel.c_raw);
  sel.j_raw = sel.c_raw.array().square().matrix().dot(ctx.gamma_inv);
  if (varc < 1e-12) {
    sel.degenerate = true;
    const double var_eta1 = ctx.v(0, 0);
    sel.kappa = std::pow(2.0 * M_PI, 4) / var_eta1;
    sel.h_coeffs = Eigen::VectorXd::Zero(d);
    sel.h_coeffs[0] = 1.0 / std::sqrt(var_eta1);
    return sel;
  }
  sel.kappa = sel.j_raw / varc;
  sel.h_coeffs = sel.c_raw / std::sqrt(varc);
  return sel;
}

double critical_value(const BootstrapDistribution& boot, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("alpha must be in (0,1)");
  }
  const int m = boot.m();
  if (m == 0) throw std::invalid_argument("empty bootstrap");
  if (m * alpha < 5.0) {
    std::cerr << "warning: bootstrap size " << m
              << " is small for alpha=" << alpha << "\n";
  }
  std::vector<double> sorted(boot.samples.data(), boot.samples.data() + m);
  std::sort(sorted.begin(), sorted.end());
  // type-7 quantile at level 1 - alpha
  const double h = (m - 1) * (1.0 - alpha);
  const int lo = static_cast<int>(std::floor(h));
  if (lo >= m - 1) return sorted.back();
  return sorted[lo] + (h - lo) * (sorted[lo + 1] - sorted[lo]);
}

namespace {

struct BandProblem {
  Eigen::MatrixXd a1;       // quadratic part of the statistic constraint
  Eigen::VectorXd g1;       // linear part: q1(c) = c'A1 c - 2 g1'c + q10
  double q10 = 0.0;
  Eigen::VectorXd gamma_inv;
  double tau = 0.0;
  double nu = 0.0;

  double q1(const Eigen::VectorXd& c) const {
    return c.dot(a1 * c) - 2.0 * g1.dot(c) + q10;
  }
  double q2(const Eigen::VectorXd& c) const {
    return c.array().square().matrix().dot(gamma_inv);
  }
  Eigen::VectorXd grad_q1(const Eigen::VectorXd& c) const {
    return 2.0 * (a1 * c - g1);
  }
  Eigen::VectorXd grad_q2(const Eigen::VectorXd& c) const {
    return 2.0 * gamma_inv.cwiseProduct(c);
  }
};

/// One-sided extremum via log-barrier Newton; sign +1 maximizes the
/// linear objective, -1 minimizes. Returns the optimizer and the
/// certified KKT stationarity residual.
std::pair<Eigen::VectorXd, double> barrier_extremize(
    const BandProblem& pb, const Eigen::VectorXd& obj, double sign,
    Eigen::VectorXd c) {
  const int d = static_cast<int>(c.size());
  double t = 1.0;
  // stopping duality gap 2/t. Beyond ~1e-9 the slacks fall below the
  // cancellation floor of tau - q1(c) and the multipliers 1/(t s_j) turn
  // into noise, so pushing t further degrades the KKT certificate.
  const double mu_stop = 1e-9;
  const double obj_scale = std::max(1.0, obj.cwiseAbs().maxCoeff());
  double kkt = 0.0;
  while (true) {
    // barrier objective normalized by t so that magnitudes stay O(|obj|):
    // phi_t(c) = -sign obj'c - (log s1 + log s2)/t. Its gradient at the
    // inner optimum is exactly the KKT residual with mu_j = 1/(t s_j).
    for (int iter = 0; iter < 200; ++iter) {
      const double s1 = pb.tau - pb.q1(c);
      const double s2 = pb.nu - pb.q2(c);
      const Eigen::VectorXd dq1 = pb.grad_q1(c);
      const Eigen::VectorXd dq2 = pb.grad_q2(c);
      const Eigen::VectorXd grad =
          -sign * obj + dq1 / (t * s1) + dq2 / (t * s2);
      if (grad.cwiseAbs().maxCoeff() <= 1e-10 * obj_scale) break;
      Eigen::MatrixXd hess = (2.0 / (t * s1)) * pb.a1;
      hess += (2.0 / (t * s2)) * pb.gamma_inv.asDiagonal();
      hess.noalias() += dq1 * dq1.transpose() / (t * s1 * s1);
      hess.noalias() += dq2 * dq2.transpose() / (t * s2 * s2);
      hess.diagonal().array() += 1e-14 * hess.trace() / d;
      const Eigen::VectorXd step = hess.ldlt().solve(grad);
      const double decrement = grad.dot(step);
      if (!(decrement > 0.0)) break;
      // damped Newton for the self-concordant barrier t*phi_t: the
      // unnormalized Newton decrement is sqrt(t * decrement); step length
      // 1/(1+lambda) guarantees monotone progress without any function
      // value comparisons (those lose to rounding near the optimum)
      const double lambda = std::sqrt(t * decrement);
      double alpha = lambda > 0.25 ? 1.0 / (1.0 + lambda) : 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls) {
        const Eigen::VectorXd cand = c - alpha * step;
        if (pb.tau - pb.q1(cand) > 0.0 && pb.nu - pb.q2(cand) > 0.0) {
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) break;
      c -= alpha * step;
      if (alpha * step.cwiseAbs().maxCoeff() <=
          1e-14 * (1.0 + c.cwiseAbs().maxCoeff())) {
        break;
      }
    }
    if (2.0 / t < mu_stop) break;
    t *= 10.0;
  }
  // certify stationarity with least-squares multipliers over the active
  // constraints: the barrier multipliers 1/(t s_j) inherit the cancellation
  // noise of the tiny slacks, while the best nonnegative (mu1, mu2) for the
  // converged point measure the true KKT residual
  {
    const double s1 = pb.tau - pb.q1(c);
    const double s2 = pb.nu - pb.q2(c);
    const bool a1_active = s1 < 1e-4 * (1.0 + std::abs(pb.tau));
    const bool a2_active = s2 < 1e-4 * (1.0 + std::abs(pb.nu));
    const Eigen::VectorXd r0 = -sign * obj;
    const Eigen::VectorXd dq1 = pb.grad_q1(c);
    const Eigen::VectorXd dq2 = pb.grad_q2(c);
    const auto residual = [&](double mu1, double mu2) {
      return (r0 + mu1 * dq1 + mu2 * dq2).cwiseAbs().maxCoeff() / obj_scale;
    };
    kkt = residual(0.0, 0.0);
    if (a1_active) {
      kkt = std::min(
          kkt, residual(std::max(0.0, -dq1.dot(r0) / dq1.dot(dq1)), 0.0));
    }
    if (a2_active) {
      kkt = std::min(
          kkt, residual(0.0, std::max(0.0, -dq2.dot(r0) / dq2.dot(dq2))));
    }
    if (a1_active && a2_active) {
      Eigen::Matrix2d gram;
      gram << dq1.dot(dq1), dq1.dot(dq2), dq1.dot(dq2), dq2.dot(dq2);
      const Eigen::Vector2d rhs(-dq1.dot(r0), -dq2.dot(r0));
      const Eigen::Vector2d mu = gram.fullPivLu().solve(rhs);
      if (mu[0] >= 0.0 && mu[1] >= 0.0) {
        kkt = std::min(kkt, residual(mu[0], mu[1]));
      }
    }
  }
  return {c, kkt};
}

}  // namespace

BandPoint band_at(const Eigen::VectorXd& eta0_c, const Eigen::VectorXd& u0,
                  const Eigen::MatrixXd& v, const Eigen::VectorXd& gamma_inv,
                  double nu, double lambda1, double lambda2, double tau) {
  if (nu < 0.0) throw std::invalid_argument("nu must be nonnegative");
  if (!(lambda1 > 0.0)) throw std::invalid_argument("lambda1 must be > 0");
  const int d = static_cast<int>(v.rows());

  Eigen::MatrixXd reg = v;
  reg.diagonal() += lambda2 * gamma_inv;
  const Eigen::LDLT<Eigen::MatrixXd> p(reg);

  BandProblem pb;
  pb.a1 = v * p.solve(v) / lambda1;
  pb.a1 = 0.5 * (pb.a1 + pb.a1.transpose()).eval();
  pb.g1 = v * p.solve(u0) / lambda1;
  pb.q10 = u0.dot(p.solve(u0)) / lambda1;
  pb.gamma_inv = gamma_inv;
  pb.tau = tau;
  pb.nu = nu;

  BandPoint out;
  if (nu == 0.0) {
    out.lower = out.upper = 0.0;
    out.feasible = pb.q10 <= tau;
    return out;
  }

  // strictly feasible start
  Eigen::VectorXd c0 = Eigen::VectorXd::Zero(d);
  const double margin = 1e-10 * std::max(1.0, tau);
  if (!(pb.q1(c0) < tau - margin)) {
    bool found = false;
    for (double mu = 1e-12; mu <= 1e12; mu *= 10.0) {
      Eigen::MatrixXd m = pb.a1;
      m.diagonal() += mu * gamma_inv;
      const Eigen::VectorXd cand = m.ldlt().solve(pb.g1);
      if (pb.q2(cand) < 0.9 * nu && pb.q1(cand) < tau - margin) {
        c0 = cand;
        found = true;
        break;
      }
    }
    if (!found) {
      out.feasible = false;
      out.lower = out.upper = 0.0;
      return out;
    }
  }

  if (eta0_c.isZero(0.0)) {
    out.lower = out.upper = 0.0;
    return out;
  }

  const auto [c_up, kkt_up] = barrier_extremize(pb, eta0_c, +1.0, c0);
  const auto [c_lo, kkt_lo] = barrier_extremize(pb, eta0_c, -1.0, c0);
  out.upper = eta0_c.dot(c_up);
  out.lower = eta0_c.dot(c_lo);
  out.kkt_residual = std::max(kkt_up, kkt_lo);
  out.c_upper = c_up;
  out.c_lower = c_lo;
  if (out.lower > out.upper) std::swap(out.lower, out.upper);
  return out;
}

BandResult build_band(const ObservationSet& data, const BandConfig& config,
                      const NuisanceFit* prefit) {
  NuisanceFit local;
  if (prefit == nullptr) {
    const RidgeLearner learner;
    local.q = fit_conditional_mean(data, learner, config.cv_folds,
                                   config.q_features);
    local.g = fit_conditional_density(data, config.density);
    prefit = &local;
  }
  const NullCurve zero = NullCurve::zero();
  const EifContext ctx(data, *prefit, zero, config.basis_dim);

  const KappaSelection ksel = select_kappa(ctx, config.cv_folds);
  BandResult result;
  result.alpha = config.alpha;
  result.seed = config.seed;
  result.kappa = config.kappa > 0.0 ? config.kappa : ksel.kappa;
  result.kappa_degenerate = config.kappa <= 0.0 && ksel.degenerate;
  if (config.nu >= 0.0) {
    result.nu = config.nu;
  } else {
    // roughness of the CV-minimizing fit: the one-SE fit (j_raw) is
    // over-smoothed by design and underestimates J(theta_0) badly enough
    // to break band coverage
    const double j_est = std::max(ksel.j_min, ksel.j_raw);
    if (!(j_est > 0.0)) {
      throw std::runtime_error(
          "cannot choose nu: ridge fit of the curve is flat; supply nu");
    }
    result.nu = 4.0 * j_est;
  }

  PsiVector psi_vec;
  switch (config.kind) {
    case EstimatorKind::plugin:
      psi_vec = psi_plugin(ctx);
      break;
    case EstimatorKind::one_step:
      psi_vec = psi_one_step(ctx);
      break;
    case EstimatorKind::tml: {
      const TmlUpdate up =
          tml_update(ctx, result.kappa, ksel.h_coeffs, config.tml);
      psi_vec = psi_tml(ctx, up);
      break;
    }
  }

  const QcqpSolver solver(ctx.v, ctx.gamma_inv);
  const QcqpSolution sol0 = solver.solve(psi_vec.u, result.kappa);
  if (sol0.degenerate) {
    throw std::runtime_error(
        "degenerate statistic at theta*=0; cannot fix lambda1/lambda2");
  }
  result.lambda1 = sol0.lambda1;
  result.lambda2 = sol0.lambda2;

  const EifMatrix eif = eif_evaluate(ctx, /*null_mode=*/true);
  const BootstrapDistribution boot =
      bootstrap_null(eif, solver, result.kappa, config.bootstrap_m,
                     config.seed, config.threads);
  result.tstar = critical_value(boot, config.alpha);

  const int g = config.grid_size;
  result.a01 = Eigen::VectorXd::LinSpaced(g, 0.0, 1.0);
  result.a.resize(g);
  result.lower.resize(g);
  result.upper.resize(g);
  result.feasible.assign(g, true);
  if (config.audit_exact_statistic) result.audit_gap.resize(g);
  bool any_feasible = false;
  for (int k = 0; k < g; ++k) {
    result.a[k] = rescale_from_unit(result.a01[k], data.a_min, data.a_max);
    const Eigen::VectorXd eta0_c =
        ctx.basis.evaluate(result.a01[k]) - ctx.eta_mean.transpose();
    const BandPoint pt =
        band_at(eta0_c, psi_vec.u, ctx.v, ctx.gamma_inv, result.nu,
                result.lambda1, result.lambda2, result.tstar);
    result.lower[k] = pt.lower;
    result.upper[k] = pt.upper;
    result.feasible[k] = pt.feasible;
    any_feasible = any_feasible || pt.feasible;
    if (config.audit_exact_statistic) {
      double gap = 0.0;
      if (pt.feasible && pt.c_upper.size() == ctx.dim()) {
        const Eigen::VectorXd u_c = psi_vec.u - ctx.v * pt.c_upper;
        const double approx =
            u_c.dot((ctx.v + (result.lambda2 * ctx.gamma_inv).asDiagonal()
                                 .toDenseMatrix())
                        .ldlt()
                        .solve(u_c)) /
            result.lambda1;
        const double exact = solver.solve(u_c, result.kappa).psi;
        gap = std::abs(approx - exact);
      }
      result.audit_gap[k] = gap;
    }
  }
  if (!any_feasible) {
    throw std::runtime_error(
        "confidence set empty at every grid point; supply a larger nu");
  }
  return result;
}

}  // namespace drinfer
