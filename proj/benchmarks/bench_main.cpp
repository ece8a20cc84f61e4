#include <benchmark/benchmark.h>

#include "csa/bounds.hpp"
#include "csa/hard_example.hpp"
#include "csa/moreau.hpp"
#include "csa/norms.hpp"
#include "csa/sa.hpp"

namespace {

csa::HardExampleSpec bench_spec() {
  csa::HardExampleSpec spec;
  spec.a = 0.5;
  spec.N = 1.0;
  spec.x0 = 1.0;
  spec.schedule = csa::StepSchedule{3.0, 440.0, 1.0};
  return spec;
}

void BM_trajectory_steps(benchmark::State& state) {
  const auto spec = bench_spec();
  const csa::SAProblem p = csa::hard_example_problem(spec);
  const int k_max = static_cast<int>(state.range(0));
  std::uint64_t stream = 0;
  for (auto _ : state) {
    auto t = csa::run_trajectory(p, spec.schedule, k_max, csa::SeedSpec{42, stream++});
    benchmark::DoNotOptimize(t.errors.back());
  }
  state.SetItemsProcessed(state.iterations() * k_max);
}
BENCHMARK(BM_trajectory_steps)->Arg(1000)->Arg(10000);

void BM_norm_eval_pnorm(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const csa::NormSpec norm = csa::NormSpec::P(d, 2.0 * std::log(static_cast<double>(d)) + 2.0);
  csa::Rng rng(csa::SeedSpec{7, 0});
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x[i] = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(csa::norm_eval(norm, x));
}
BENCHMARK(BM_norm_eval_pnorm)->Arg(16)->Arg(256);

void BM_moreau_numeric(benchmark::State& state) {
  const int d = 8;
  const auto cfg = csa::MoreauConfig::Make(csa::NormSpec::Max(d),
                                           csa::NormSpec::P(d, 2.0 * std::log(8.0)), 0.5);
  csa::Rng rng(csa::SeedSpec{11, 0});
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x[i] = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(csa::moreau_eval(cfg, x));
}
BENCHMARK(BM_moreau_numeric);

void BM_mult_curve(benchmark::State& state) {
  const auto spec = bench_spec();
  const auto cfg = csa::MoreauConfig::Make(csa::NormSpec::Euclidean(1), csa::NormSpec::Euclidean(1), 1.0);
  const auto ledger = csa::build_mult_ledger(spec.a, spec.N, spec.x0, 0.0, cfg, spec.schedule);
  std::vector<double> ks;
  for (double k = 0; k <= 10000; ++k) ks.push_back(k);
  for (auto _ : state) {
    auto curve = csa::mult_bound_curve(ledger, 0.05, 0, csa::BoundVariant::thm1_Dpos, ks);
    benchmark::DoNotOptimize(curve.values.back());
  }
  state.SetItemsProcessed(state.iterations() * ks.size());
}
BENCHMARK(BM_mult_curve);

}  // namespace

BENCHMARK_MAIN();
