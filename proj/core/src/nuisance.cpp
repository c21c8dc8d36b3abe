#include "drinfer/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace drinfer {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double gauss_kernel(double u) {
  return std::exp(-0.5 * u * u) / std::sqrt(2.0 * M_PI);
}

/// Mass of the scaled kernel centered at a that falls inside [0,1].
double boundary_mass(double a, double r) {
  return normal_cdf((1.0 - a) / r) - normal_cdf(-a / r);
}

void monomials_rec(const Eigen::RowVectorXd& w, int start, int degree_left,
                   double prod, bool any, std::vector<double>& out) {
  if (any) out.push_back(prod);
  if (degree_left == 0) return;
  for (int j = start; j < w.size(); ++j) {
    monomials_rec(w, j, degree_left - 1, prod * w[j], true, out);
  }
}

}  // namespace

Eigen::RowVectorXd exposure_features(double a01, const FeatureConfig& cfg) {
  Eigen::RowVectorXd out(exposure_feature_count(cfg));
  int k = 0;
  double p = 1.0;
  for (int d = 0; d < cfg.exposure_degree; ++d) {
    p *= a01;
    out[k++] = p;
  }
  if (cfg.basis_terms > 0) {
    const SobolevBasis basis(cfg.basis_terms);
    out.segment(k, cfg.basis_terms) = basis.evaluate(a01).transpose();
  }
  return out;
}

int exposure_feature_count(const FeatureConfig& cfg) {
  return cfg.exposure_degree + cfg.basis_terms;
}

Eigen::RowVectorXd covariate_features(const Eigen::RowVectorXd& w,
                                      const FeatureConfig& cfg) {
  std::vector<double> vals;
  monomials_rec(w, 0, cfg.covariate_degree, 1.0, false, vals);
  return Eigen::Map<Eigen::RowVectorXd>(vals.data(),
                                        static_cast<int>(vals.size()));
}

int covariate_feature_count(int q, const FeatureConfig& cfg) {
  if (q == 0) return 0;
  // C(q + d, d) - 1 monomials of total degree 1..d
  double count = 1.0;
  for (int i = 1; i <= cfg.covariate_degree; ++i) {
    count = count * (q + i) / i;
  }
  return static_cast<int>(std::lround(count)) - 1;
}

RidgeLearner::RidgeLearner() {
  for (int i = 0; i < 10; ++i) {
    lambda_grid.push_back(std::pow(10.0, -4.0 + 7.0 * i / 9.0));
  }
}

Eigen::VectorXd RidgeLearner::fit(const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& y, int folds) const {
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  if (folds < 2 || n < 2 * folds) {
    throw std::invalid_argument("ridge CV needs folds >= 2 and n >= 2*folds");
  }
  if (lambda_grid.empty()) throw std::invalid_argument("empty lambda grid");
  std::vector<double> lambdas = lambda_grid;
  std::sort(lambdas.begin(), lambdas.end());

  const int nl = static_cast<int>(lambdas.size());
  Eigen::MatrixXd cv(folds, nl);
  for (int f = 0; f < folds; ++f) {
    int ntr = 0;
    for (int i = 0; i < n; ++i) ntr += (i % folds != f);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd xty = Eigen::VectorXd::Zero(p);
    for (int i = 0; i < n; ++i) {
      if (i % folds == f) continue;
      gram.noalias() += x.row(i).transpose() * x.row(i);
      xty.noalias() += x.row(i).transpose() * y[i];
    }
    gram /= ntr;
    xty /= ntr;
    for (int j = 0; j < nl; ++j) {
      Eigen::MatrixXd reg = gram;
      reg.diagonal().array() += lambdas[j] / n;
      const Eigen::VectorXd beta = reg.ldlt().solve(xty);
      double err = 0.0;
      int nte = 0;
      for (int i = 0; i < n; ++i) {
        if (i % folds != f) continue;
        const double r = y[i] - x.row(i).dot(beta);
        err += r * r;
        ++nte;
      }
      cv(f, j) = err / nte;
    }
  }
  const Eigen::VectorXd mean_cv = cv.colwise().mean();
  int jmin = 0;
  mean_cv.minCoeff(&jmin);
  const Eigen::VectorXd centered =
      cv.col(jmin).array() - mean_cv[jmin];
  const double se =
      std::sqrt(centered.squaredNorm() / (folds - 1)) / std::sqrt(folds);
  const double thresh = mean_cv[jmin] + se_multiplier * se;
  int jsel = jmin;
  for (int j = nl - 1; j >= 0; --j) {
    if (mean_cv[j] <= thresh) {
      jsel = j;
      break;
    }
  }

  Eigen::MatrixXd gram = x.transpose() * x / n;
  gram.diagonal().array() += lambdas[jsel] / n;
  return gram.ldlt().solve(x.transpose() * y / n);
}

namespace {

Eigen::MatrixXd q_design(const ObservationSet& data, const FeatureConfig& cfg) {
  const int n = data.n();
  const int pa = exposure_feature_count(cfg);
  const int pw = covariate_feature_count(data.q(), cfg);
  Eigen::MatrixXd x(n, (1 + pa) * (1 + pw));
  for (int i = 0; i < n; ++i) {
    Eigen::RowVectorXd fa(1 + pa);
    fa[0] = 1.0;
    fa.tail(pa) = exposure_features(data.a01[i], cfg);
    Eigen::RowVectorXd fw(1 + pw);
    fw[0] = 1.0;
    if (pw > 0) fw.tail(pw) = covariate_features(data.w.row(i), cfg);
    int k = 0;
    for (int ja = 0; ja <= pa; ++ja) {
      for (int jw = 0; jw <= pw; ++jw) x(i, k++) = fa[ja] * fw[jw];
    }
  }
  return x;
}

}  // namespace

ConditionalMean fit_conditional_mean(const ObservationSet& data,
                                     const RegressionLearner& learner,
                                     int folds, const FeatureConfig& cfg) {
  const Eigen::MatrixXd x = q_design(data, cfg);
  const Eigen::VectorXd beta = learner.fit(x, data.y, folds);
  const int pa = exposure_feature_count(cfg);
  const int pw = covariate_feature_count(data.q(), cfg);
  ConditionalMean model;
  model.cfg = cfg;
  model.b = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                           Eigen::Dynamic, Eigen::RowMajor>>(
      beta.data(), 1 + pa, 1 + pw);
  return model;
}

double ConditionalMean::predict(const Eigen::RowVectorXd& w,
                                double a01) const {
  const int pa = exposure_feature_count(cfg);
  Eigen::RowVectorXd fa(1 + pa);
  fa[0] = 1.0;
  fa.tail(pa) = exposure_features(a01, cfg);
  Eigen::RowVectorXd fw(b.cols());
  fw[0] = 1.0;
  if (b.cols() > 1) fw.tail(b.cols() - 1) = covariate_features(w, cfg);
  return fa * b * fw.transpose();
}

Eigen::VectorXd ConditionalMean::predict_at(const ObservationSet& data) const {
  Eigen::VectorXd out(data.n());
  for (int i = 0; i < data.n(); ++i) {
    out[i] = predict(data.w.row(i), data.a01[i]);
  }
  return out;
}

Eigen::MatrixXd ConditionalMean::cross_matrix(
    const Eigen::MatrixXd& w, const Eigen::VectorXd& a01) const {
  const int nw = static_cast<int>(w.rows());
  const int na = static_cast<int>(a01.size());
  const int pa = exposure_feature_count(cfg);
  Eigen::MatrixXd fa(na, 1 + pa);
  for (int k = 0; k < na; ++k) {
    fa(k, 0) = 1.0;
    fa.row(k).tail(pa) = exposure_features(a01[k], cfg);
  }
  Eigen::MatrixXd fw(nw, b.cols());
  for (int i = 0; i < nw; ++i) {
    fw(i, 0) = 1.0;
    if (b.cols() > 1) fw.row(i).tail(b.cols() - 1) = covariate_features(w.row(i), cfg);
  }
  return fw * b.transpose() * fa.transpose();
}

double select_marginal_bandwidth(const Eigen::VectorXd& a01,
                                 const std::vector<double>& bandwidths,
                                 int folds) {
  if (bandwidths.empty()) throw std::invalid_argument("empty bandwidth list");
  const int n = static_cast<int>(a01.size());
  double best_r = bandwidths.front();
  double best_ll = -std::numeric_limits<double>::infinity();
  for (const double r : bandwidths) {
    if (!(r > 0.0)) throw std::invalid_argument("bandwidths must be positive");
    double ll = 0.0;
    for (int f = 0; f < folds; ++f) {
      for (int i = 0; i < n; ++i) {
        if (i % folds != f) continue;
        double dens = 0.0;
        int ntr = 0;
        for (int j = 0; j < n; ++j) {
          if (j % folds == f) continue;
          dens += gauss_kernel((a01[i] - a01[j]) / r) / r;
          ++ntr;
        }
        dens = dens / ntr / boundary_mass(a01[i], r);
        ll += std::log(std::max(dens, 1e-300));
      }
    }
    if (ll > best_ll) {
      best_ll = ll;
      best_r = r;
    }
  }
  return best_r;
}

namespace {

/// Log-link fit of the kernel-smoothed density target at one grid point:
/// IRLS for min_b (1/n) sum_i [exp(x_i b) - t_i x_i b] + ridge.
Eigen::VectorXd log_link_fit(const Eigen::MatrixXd& fw,
                             const Eigen::VectorXd& target) {
  const int n = static_cast<int>(fw.rows());
  const int p = static_cast<int>(fw.cols());
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  b[0] = std::log(std::max(target.mean(), 1e-10));
  const double ridge = 1e-6;
  for (int iter = 0; iter < 40; ++iter) {
    Eigen::VectorXd mu(n);
    for (int i = 0; i < n; ++i) {
      mu[i] = std::exp(std::clamp(fw.row(i).dot(b), -20.0, 10.0));
    }
    Eigen::VectorXd grad = fw.transpose() * (mu - target) / n + ridge * b;
    Eigen::MatrixXd hess = fw.transpose() * mu.asDiagonal() * fw / n;
    hess.diagonal().array() += ridge;
    Eigen::VectorXd step = hess.ldlt().solve(grad);
    step = step.cwiseMax(-5.0).cwiseMin(5.0);
    b -= step;
    if (step.cwiseAbs().maxCoeff() < 1e-10) break;
  }
  return b;
}

ConditionalDensity fit_density_with_bandwidth(const ObservationSet& data,
                                              const DensityConfig& cfg,
                                              double r) {
  const int n = data.n();
  const int g = cfg.grid_size;
  FeatureConfig wcfg;
  wcfg.covariate_degree = cfg.covariate_degree;
  const int pw = covariate_feature_count(data.q(), wcfg);
  Eigen::MatrixXd fw(n, 1 + pw);
  for (int i = 0; i < n; ++i) {
    fw(i, 0) = 1.0;
    if (pw > 0) fw.row(i).tail(pw) = covariate_features(data.w.row(i), wcfg);
  }
  ConditionalDensity out;
  out.grid_ = Eigen::VectorXd::LinSpaced(g, 0.0, 1.0);
  out.coefs_.resize(g, 1 + pw);
  out.wcfg_ = wcfg;
  out.bandwidth_ = r;
  out.floor_ = cfg.g_floor;
  for (int j = 0; j < g; ++j) {
    const double aj = out.grid_[j];
    const double corr = boundary_mass(aj, r);
    Eigen::VectorXd target(n);
    for (int i = 0; i < n; ++i) {
      target[i] = gauss_kernel((data.a01[i] - aj) / r) / r / corr;
    }
    out.coefs_.row(j) = log_link_fit(fw, target).transpose();
  }
  return out;
}

}  // namespace

ConditionalDensity fit_conditional_density(const ObservationSet& data,
                                           const DensityConfig& cfg) {
  if (cfg.grid_size < 10) throw std::invalid_argument("grid_size must be >= 10");
  if (cfg.bandwidths.empty()) throw std::invalid_argument("empty bandwidth list");
  const double spread = data.a01.maxCoeff() - data.a01.minCoeff();
  if (spread <= 0.0) throw std::invalid_argument("all exposures identical");

  double r;
  if (!cfg.full_conditional_cv) {
    r = select_marginal_bandwidth(data.a01, cfg.bandwidths, cfg.folds);
  } else {
    // Slow path: held-out conditional log-likelihood per bandwidth.
    const int n = data.n();
    double best_ll = -std::numeric_limits<double>::infinity();
    r = cfg.bandwidths.front();
    for (const double cand : cfg.bandwidths) {
      double ll = 0.0;
      for (int f = 0; f < cfg.folds; ++f) {
        std::vector<int> tr, te;
        for (int i = 0; i < n; ++i) (i % cfg.folds == f ? te : tr).push_back(i);
        ObservationSet sub;
        sub.w.resize(static_cast<int>(tr.size()), data.q());
        sub.a.resize(static_cast<int>(tr.size()));
        sub.y.resize(static_cast<int>(tr.size()));
        sub.a01.resize(static_cast<int>(tr.size()));
        for (std::size_t i = 0; i < tr.size(); ++i) {
          sub.w.row(static_cast<int>(i)) = data.w.row(tr[i]);
          sub.a[static_cast<int>(i)] = data.a[tr[i]];
          sub.y[static_cast<int>(i)] = data.y[tr[i]];
          sub.a01[static_cast<int>(i)] = data.a01[tr[i]];
        }
        sub.a_min = data.a_min;
        sub.a_max = data.a_max;
        const ConditionalDensity fit =
            fit_density_with_bandwidth(sub, cfg, cand);
        for (const int i : te) {
          ll += std::log(fit.density(data.w.row(i), data.a01[i]));
        }
      }
      if (ll > best_ll) {
        best_ll = ll;
        r = cand;
      }
    }
  }
  return fit_density_with_bandwidth(data, cfg, r);
}

namespace {

/// Trapezoid mass of a piecewise-linear density given its grid values; exact
/// because the interpolant is linear between equispaced grid points.
double trapezoid_mass(const Eigen::VectorXd& at_grid) {
  const int g = static_cast<int>(at_grid.size());
  const double h = 1.0 / (g - 1);
  return (at_grid.sum() - 0.5 * (at_grid[0] + at_grid[g - 1])) * h;
}

}  // namespace

double ConditionalDensity::density(const Eigen::RowVectorXd& w,
                                   double a01) const {
  const int g = static_cast<int>(grid_.size());
  const int pw = static_cast<int>(coefs_.cols()) - 1;
  Eigen::RowVectorXd fw(1 + pw);
  fw[0] = 1.0;
  if (pw > 0) fw.tail(pw) = covariate_features(w, wcfg_);
  const Eigen::VectorXd at_grid =
      (coefs_ * fw.transpose()).array().min(10.0).max(-20.0).exp();
  // self-normalize so the conditional density integrates to one exactly
  const double mass = std::max(trapezoid_mass(at_grid), 1e-300);
  const double clamped = std::clamp(a01, 0.0, 1.0);
  const double pos = clamped * (g - 1);
  const int j = std::min(static_cast<int>(pos), g - 2);
  const double t = pos - j;
  return std::max(((1.0 - t) * at_grid[j] + t * at_grid[j + 1]) / mass,
                  floor_);
}

Eigen::MatrixXd ConditionalDensity::density_matrix(
    const Eigen::MatrixXd& w, const Eigen::VectorXd& a01) const {
  const int nw = static_cast<int>(w.rows());
  const int na = static_cast<int>(a01.size());
  const int g = static_cast<int>(grid_.size());
  const int pw = static_cast<int>(coefs_.cols()) - 1;
  Eigen::MatrixXd fw(nw, 1 + pw);
  for (int i = 0; i < nw; ++i) {
    fw(i, 0) = 1.0;
    if (pw > 0) fw.row(i).tail(pw) = covariate_features(w.row(i), wcfg_);
  }
  // density at every grid point for every w row, then interpolate
  Eigen::MatrixXd at_grid = (fw * coefs_.transpose())
                                .array()
                                .min(10.0)
                                .max(-20.0)
                                .exp();
  // self-normalize each row so every conditional density integrates to one
  for (int i = 0; i < nw; ++i) {
    at_grid.row(i) /=
        std::max(trapezoid_mass(at_grid.row(i).transpose()), 1e-300);
  }
  Eigen::MatrixXd out(nw, na);
  for (int k = 0; k < na; ++k) {
    const double pos = std::clamp(a01[k], 0.0, 1.0) * (g - 1);
    const int j = std::min(static_cast<int>(pos), g - 2);
    const double t = pos - j;
    out.col(k) = ((1.0 - t) * at_grid.col(j) + t * at_grid.col(j + 1))
                     .cwiseMax(floor_);
  }
  return out;
}

Eigen::VectorXd stability_weights(const NuisanceFit& fit,
                                  const ObservationSet& data,
                                  int* floored_count) {
  const Eigen::MatrixXd dens = fit.g.density_matrix(data.w, data.a01);
  const Eigen::VectorXd gbar = dens.colwise().mean();
  const int n = data.n();
  Eigen::VectorXd weights(n);
  int floored = 0;
  for (int i = 0; i < n; ++i) {
    const double own = dens(i, i);
    if (own <= fit.g.floor()) ++floored;
    weights[i] = gbar[i] / std::max(own, fit.g.floor());
  }
  if (floored_count != nullptr) *floored_count = floored;
  return weights;
}

PluginCurve plugin_curve(const ConditionalMean& q, const ObservationSet& data,
                         int grid_size) {
  PluginCurve curve;
  curve.cfg_ = q.cfg;
  const int pw = static_cast<int>(q.b.cols()) - 1;
  Eigen::RowVectorXd mean_fw = Eigen::RowVectorXd::Zero(1 + pw);
  for (int i = 0; i < data.n(); ++i) {
    mean_fw[0] += 1.0;
    if (pw > 0) {
      mean_fw.tail(pw) += covariate_features(data.w.row(i), q.cfg);
    }
  }
  mean_fw /= data.n();
  curve.bvec_ = q.b * mean_fw.transpose();
  curve.grid_ = Eigen::VectorXd::LinSpaced(grid_size, 0.0, 1.0);
  curve.values_.resize(grid_size);
  for (int j = 0; j < grid_size; ++j) {
    curve.values_[j] = curve(curve.grid_[j]);
  }
  return curve;
}

double PluginCurve::operator()(double a01) const {
  const int pa = exposure_feature_count(cfg_);
  Eigen::RowVectorXd fa(1 + pa);
  fa[0] = 1.0;
  fa.tail(pa) = exposure_features(a01, cfg_);
  return fa.dot(bvec_);
}

}  // namespace drinfer
