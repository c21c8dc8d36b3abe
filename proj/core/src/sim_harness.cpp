#include "drinfer/sim_harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "drinfer/quadrature.hpp"
#include "drinfer/rng.hpp"

namespace drinfer {

namespace {

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr int kCdfPoints = 1025;

}  // namespace

double dgp_zeta(double w1, double w2) {
  return 3.0 * (expit(w1 + w2) - 0.5);
}

double dgp_theta0(double a) { return (2.0 * a + a * a - a * a * a) / 2.0; }

double dgp_sample_exposure(double zeta, double u) {
  // inverse-CDF sampling of g0(a|w) on [-1, 1] via a tabulated trapezoid CDF
  std::array<double, kCdfPoints> grid, cdf;
  for (int j = 0; j < kCdfPoints; ++j) {
    grid[j] = -1.0 + 2.0 * j / (kCdfPoints - 1);
  }
  cdf[0] = 0.0;
  double prev = expit(zeta * grid[0]);
  for (int j = 1; j < kCdfPoints; ++j) {
    const double cur = expit(zeta * grid[j]);
    cdf[j] = cdf[j - 1] + 0.5 * (prev + cur);
    prev = cur;
  }
  const double target = u * cdf[kCdfPoints - 1];
  const auto it = std::lower_bound(cdf.begin(), cdf.end(), target);
  const int j = std::max<int>(1, static_cast<int>(it - cdf.begin()));
  const double seg = cdf[j] - cdf[j - 1];
  const double t = seg > 0.0 ? (target - cdf[j - 1]) / seg : 0.0;
  return grid[j - 1] + t * (grid[j] - grid[j - 1]);
}

ObservationSet gen_data(const DgpConfig& cfg) {
  if (cfg.setting != 1 && cfg.setting != 2) {
    throw std::invalid_argument("setting must be 1 or 2");
  }
  if (cfg.n < 10) throw std::invalid_argument("n must be >= 10");
  const int n = cfg.n;
  Rng rng(cfg.seed);

  Eigen::MatrixXd w(n, 2);
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) {
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    w(i, 0) = z1;
    w(i, 1) = 0.5 * z1 + std::sqrt(0.75) * z2;
    z[i] = dgp_zeta(w(i, 0), w(i, 1));
  }

  Eigen::VectorXd a(n);
  for (int i = 0; i < n; ++i) {
    a[i] = dgp_sample_exposure(z[i], rng.uniform());
  }

  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const double eps = rng.uniform(-2.0, 2.0);
    y[i] = -z[i] * (1.0 - a[i] / 2.0) + eps;
    if (cfg.setting == 2) y[i] += dgp_theta0(a[i]);
  }
  return ObservationSet::from_raw(std::move(w), std::move(a), std::move(y));
}

namespace {

/// Marginal exposure density on [-1,1] under the DGP, averaged over
/// Monte Carlo draws of W, evaluated on Gauss-Legendre nodes.
struct MarginalDensity {
  std::vector<double> nodes, weights, density;
};

MarginalDensity exposure_marginal(int mc_draws, std::uint64_t seed) {
  const QuadratureRule rule = gauss_legendre(128);
  const std::vector<double>& x = rule.nodes;
  const std::vector<double>& wq = rule.weights;
  MarginalDensity out;
  const int k = static_cast<int>(x.size());
  out.nodes = x;  // already on [-1, 1]
  out.weights = wq;
  out.density.assign(k, 0.0);
  Rng rng(seed);
  for (int i = 0; i < mc_draws; ++i) {
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    const double z = dgp_zeta(z1, 0.5 * z1 + std::sqrt(0.75) * z2);
    double norm = 0.0;
    for (int j = 0; j < k; ++j) norm += wq[j] * expit(z * x[j]);
    for (int j = 0; j < k; ++j) {
      out.density[j] += expit(z * x[j]) / norm / mc_draws;
    }
  }
  return out;
}

}  // namespace

double oracle_theta0_mean(int mc_draws, std::uint64_t seed) {
  const MarginalDensity g = exposure_marginal(mc_draws, seed);
  double mean = 0.0;
  for (std::size_t j = 0; j < g.nodes.size(); ++j) {
    mean += g.weights[j] * g.density[j] * dgp_theta0(g.nodes[j]);
  }
  return mean;
}

double oracle_kappa(int mc_draws, std::uint64_t seed) {
  // J of theta0 rescaled to [0,1]: second derivative 4 theta0''(a)
  const double j_val = integrate(
      [](double u) {
        const double a = 2.0 * u - 1.0;
        const double dd = 4.0 * (1.0 - 3.0 * a);
        return dd * dd;
      },
      0.0, 1.0, 128);
  const MarginalDensity g = exposure_marginal(mc_draws, seed);
  double mean = 0.0, mean_sq = 0.0;
  for (std::size_t j = 0; j < g.nodes.size(); ++j) {
    const double th = dgp_theta0(g.nodes[j]);
    mean += g.weights[j] * g.density[j] * th;
    mean_sq += g.weights[j] * g.density[j] * th * th;
  }
  const double var = mean_sq - mean * mean;
  if (!(var > 0.0)) throw std::runtime_error("degenerate oracle variance");
  return j_val / var;
}

double McReport::rejection_rate(const std::string& method, int n,
                                double alpha) const {
  int total = 0, rejected = 0;
  for (const auto& row : rows) {
    if (row.method != method || row.n != n || row.failed) continue;
    ++total;
    if (row.p <= alpha) ++rejected;
  }
  if (total == 0) throw std::invalid_argument("no rows for " + method);
  return static_cast<double>(rejected) / total;
}

std::vector<double> McReport::p_values(const std::string& method,
                                       int n) const {
  std::vector<double> out;
  for (const auto& row : rows) {
    if (row.method == method && row.n == n && !row.failed) {
      out.push_back(row.p);
    }
  }
  return out;
}

double McReport::failure_rate() const {
  if (rows.empty()) return 0.0;
  int failed = 0;
  for (const auto& row : rows) failed += row.failed;
  return static_cast<double>(failed) / rows.size();
}

void McReport::to_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out.precision(17);
  out << "method,n,rep,p,failed\n";
  for (const auto& row : rows) {
    out << row.method << ',' << row.n << ',' << row.rep << ',' << row.p << ','
        << (row.failed ? 1 : 0) << '\n';
  }
}

McReport run_mc(const McConfig& cfg) {
  if (cfg.reps < 1) throw std::invalid_argument("reps must be >= 1");
  double kappa0 = cfg.oracle_kappa_value;
  if (kappa0 <= 0.0) kappa0 = oracle_kappa();

  struct Variant {
    std::string name;
    EstimatorKind kind;
    bool adaptive;
  };
  std::vector<Variant> variants;
  if (cfg.run_one_step) {
    variants.push_back({"one_step_oracle", EstimatorKind::one_step, false});
    if (cfg.run_adaptive) {
      variants.push_back(
          {"one_step_adaptive", EstimatorKind::one_step, true});
    }
  }
  if (cfg.run_tml) {
    variants.push_back({"tml_oracle", EstimatorKind::tml, false});
    if (cfg.run_adaptive) {
      variants.push_back({"tml_adaptive", EstimatorKind::tml, true});
    }
  }

  McReport report;
  std::mutex report_mutex;
  const NullCurve zero = NullCurve::zero();

  const auto run_rep = [&](int n, int rep) {
    const std::uint64_t rep_seed =
        Rng::derive(cfg.seed, static_cast<std::uint64_t>(n) * 1000003u + rep)
            .next_u64();
    std::vector<McRow> local;
    ObservationSet data;
    NuisanceFit fit;
    try {
      DgpConfig dgp;
      dgp.setting = cfg.setting;
      dgp.n = n;
      dgp.seed = rep_seed;
      data = gen_data(dgp);
      const RidgeLearner learner;
      fit.q = fit_conditional_mean(data, learner, 5, FeatureConfig{});
      fit.g = fit_conditional_density(data, DensityConfig{});
    } catch (const std::exception& e) {
      for (const auto& v : variants) {
        local.push_back({v.name, n, rep, 1.0, true, e.what()});
      }
      if (cfg.run_baseline) {
        local.push_back({"baseline", n, rep, 1.0, true, e.what()});
      }
      std::lock_guard<std::mutex> lock(report_mutex);
      report.rows.insert(report.rows.end(), local.begin(), local.end());
      return;
    }

    int variant_idx = 0;
    for (const auto& v : variants) {
      McRow row{v.name, n, rep, 1.0, false, ""};
      try {
        TestConfig tc;
        tc.kind = v.kind;
        tc.kappa = v.adaptive ? KappaPolicy::data_adaptive()
                              : KappaPolicy::fixed(kappa0);
        tc.basis_dim = cfg.basis_dim;
        tc.bootstrap_m = cfg.bootstrap_m;
        tc.seed = Rng::derive(rep_seed, 100 + variant_idx).next_u64();
        row.p = run_test(data, zero, tc, &fit).p;
      } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
      }
      local.push_back(row);
      ++variant_idx;
    }
    if (cfg.run_baseline) {
      McRow row{"baseline", n, rep, 1.0, false, ""};
      try {
        row.p = primitive_function_test(data, fit, zero, cfg.bootstrap_m,
                                        Rng::derive(rep_seed, 999).next_u64())
                    .p;
      } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
      }
      local.push_back(row);
    }
    std::lock_guard<std::mutex> lock(report_mutex);
    report.rows.insert(report.rows.end(), local.begin(), local.end());
  };

  for (const int n : cfg.n_list) {
    if (cfg.threads <= 1) {
      for (int rep = 0; rep < cfg.reps; ++rep) run_rep(n, rep);
    } else {
      std::vector<std::thread> pool;
      std::atomic<int> next{0};
      for (int t = 0; t < cfg.threads; ++t) {
        pool.emplace_back([&] {
          int rep;
          while ((rep = next.fetch_add(1)) < cfg.reps) run_rep(n, rep);
        });
      }
      for (auto& th : pool) th.join();
    }
  }
  // Worker threads append rep blocks in completion order; restore the
  // sequential ordering so report contents are independent of cfg.threads.
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const McRow& a, const McRow& b) {
                     return a.n != b.n ? a.n < b.n : a.rep < b.rep;
                   });
  return report;
}

}  // namespace drinfer
