#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "drinfer/conf_bands.hpp"
#include "drinfer/rng.hpp"
#include "drinfer/sim_harness.hpp"
#include "drinfer/sup_test.hpp"

namespace {

using namespace drinfer;

struct Problem {
  Eigen::MatrixXd v;
  Eigen::VectorXd gamma_inv;
  Eigen::VectorXd u;
};

Problem make_problem(int d, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) m(i, j) = rng.normal();
  }
  Problem p;
  p.v = m * m.transpose() / d + Eigen::MatrixXd::Identity(d, d);
  p.gamma_inv.resize(d);
  p.u.resize(d);
  const SobolevBasis basis(d);
  for (int j = 0; j < d; ++j) {
    p.gamma_inv[j] = 1.0 / basis.eigenvalue(j + 1);
    p.u[j] = 0.1 * rng.normal();
  }
  return p;
}

void BM_QcqpSolve(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const Problem p = make_problem(d, 5);
  const QcqpSolver solver(p.v, p.gamma_inv);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solver.solve(p.u, 300.0).psi);
  }
}
BENCHMARK(BM_QcqpSolve)->Arg(8)->Arg(20)->Arg(40);

void BM_QcqpFactorize(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const Problem p = make_problem(d, 5);
  for (auto _ : state) {
    const QcqpSolver solver(p.v, p.gamma_inv);
    benchmark::DoNotOptimize(solver.solve(p.u, 300.0).psi);
  }
}
BENCHMARK(BM_QcqpFactorize)->Arg(20);

void BM_BootstrapNull(benchmark::State& state) {
  const int n = 500;
  DgpConfig dgp;
  dgp.setting = 2;
  dgp.n = n;
  dgp.seed = 3;
  const ObservationSet data = gen_data(dgp);
  NuisanceFit fit;
  fit.q = fit_conditional_mean(data, RidgeLearner{}, 5);
  fit.g = fit_conditional_density(data);
  const EifContext ctx(data, fit, NullCurve::zero(), 20);
  const QcqpSolver solver(ctx.v, ctx.gamma_inv);
  const EifMatrix eif = eif_evaluate(ctx, true);
  const int m = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        bootstrap_null(eif, solver, 300.0, m, 11).samples.sum());
  }
}
BENCHMARK(BM_BootstrapNull)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_BandPoint(benchmark::State& state) {
  const Problem p = make_problem(20, 9);
  Rng rng(13);
  Eigen::VectorXd eta0(20);
  for (int j = 0; j < 20; ++j) eta0[j] = rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        band_at(eta0, p.u, p.v, p.gamma_inv, 2.0, 1.0, 1.0, 10.0).upper);
  }
}
BENCHMARK(BM_BandPoint)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
