// Serial vs OpenMP timings for the two parallel paths: the componentwise
// regularizer sum and the kernel x instance experiment loop.
#include <random>

#include <benchmark/benchmark.h>

#include "bilevel/harness.hpp"
#include "bilevel/regularizer.hpp"

using namespace bilevel;

namespace {

Eigen::VectorXd random_w(Eigen::Index n) {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> nd;
  Eigen::VectorXd w(n);
  for (auto& x : w) x = nd(gen);
  return w;
}

const RegSpec& reg_spec() {
  static const RegSpec s(0.5, Penalty(PenaltyId::psi1), make_smooth_abs(KernelId::rho4));
  return s;
}

void BM_RegSerial(benchmark::State& state) {
  const auto w = random_w(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(smoothed_reg_serial(reg_spec(), 0.01, w));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_RegParallel(benchmark::State& state) {
  const auto w = random_w(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(smoothed_reg(reg_spec(), 0.01, w));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

// range(0) = worker threads, 1 is the serial baseline.
void BM_Experiment(benchmark::State& state) {
  ExperimentConfig c;
  c.n = 20;
  c.m1 = c.m2 = 40;
  c.num_instances = 4;
  c.timing = false;
  c.jobs = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(run_experiment(c));
}

}  // namespace

BENCHMARK(BM_RegSerial)->RangeMultiplier(8)->Range(1 << 10, 1 << 19);
BENCHMARK(BM_RegParallel)->RangeMultiplier(8)->Range(1 << 10, 1 << 19);
BENCHMARK(BM_Experiment)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
