// Serial reference vs OpenMP execution of the W-step kernels.
//   bench_kernels --benchmark_filter=WStep

#include <benchmark/benchmark.h>

#include "dmtrl/data.hpp"
#include "dmtrl/objectives.hpp"
#include "dmtrl/runtime.hpp"

using namespace dmtrl;

namespace {

const MultiTaskProblem& problem() {
  static const MultiTaskProblem p = [] {
    SyntheticSpec spec = synthetic_preset("synthetic1");
    spec.n_min = 800;
    spec.n_max = 1200;
    return gen_synthetic(spec).train;
  }();
  return p;
}

// state.range(0): 0 serial, 1 parallel.  state.range(1): gap stride (1 = every round).
void WStep(benchmark::State& state) {
  const MultiTaskProblem& p = problem();
  const TaskCovariance cov = TaskCovariance::scaled_identity(p.m());
  RunConfig c;
  c.T = 10;
  c.gap_tol = 0.0;
  c.execution = state.range(0) ? Execution::parallel : Execution::serial;
  c.gap_stride = static_cast<int>(state.range(1));
  for (auto _ : state) {
    WStepResult r = run_w_step(p, cov, DualState::zeros(p), c, 1.0);
    benchmark::DoNotOptimize(r.state.w.data());
  }
  state.SetLabel(state.range(0) ? "parallel" : "serial");
  state.counters["rounds/s"] = benchmark::Counter(static_cast<double>(c.T), benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(WStep)->ArgsProduct({{0, 1}, {1, 1000}})->Unit(benchmark::kMillisecond);

// Full certificate from scratch, serial per-task terms.
void DualityGap(benchmark::State& state) {
  const MultiTaskProblem& p = problem();
  const TaskCovariance cov = TaskCovariance::scaled_identity(p.m());
  RunConfig c;
  c.T = 3;
  const DualState s = run_w_step(p, cov, DualState::zeros(p), c, 1.0).state;
  for (auto _ : state) {
    ObjectiveReport r = duality_gap(p, s, cov);
    benchmark::DoNotOptimize(r.gap);
  }
}
BENCHMARK(DualityGap)->Unit(benchmark::kMillisecond);

void FullRun(benchmark::State& state) {
  const MultiTaskProblem& p = problem();
  RunConfig c;
  c.P = 2;
  c.T = 10;
  c.gap_tol = 0.0;
  c.execution = state.range(0) ? Execution::parallel : Execution::serial;
  for (auto _ : state) {
    ModelResult r = run_dmtrl(p, c);
    benchmark::DoNotOptimize(r.W.data());
  }
  state.SetLabel(state.range(0) ? "parallel" : "serial");
}
BENCHMARK(FullRun)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
