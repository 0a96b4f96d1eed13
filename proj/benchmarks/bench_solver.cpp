#include <memory>
#include <vector>

#include <benchmark/benchmark.h>

#include "mrtraj/pipeline.hpp"
#include "mrtraj/solver.hpp"

namespace {

using namespace mrtraj;

struct Fixture {
  Scenario scn;
  BasisMatrices basis;
  std::shared_ptr<const ConstraintSystem> sys;
  std::vector<SolverState> states;
  std::vector<ObjectiveMode> modes;

  Fixture(int n, int members) {
    scn = generate(ScenarioFamily{}, n, 2, 1);
    basis = build_basis(scn.horizon);
    sys = std::make_shared<const ConstraintSystem>(assemble(scn, basis, 0.1));
    const CandidateBatch batch = sample_naive_prior(scn, basis, members, 2);
    for (const auto& c : batch.candidates) {
      states.push_back(initial_state(*sys, c));
      modes.push_back(ObjectiveMode::projection(c));
    }
  }
};

void BM_StepBatched(benchmark::State& st) {
  Fixture f(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
  FixedPointSolver solver(f.sys, ObjectiveMode::Kind::kProjection, {});
  std::vector<const ObjectiveMode*> modes;
  for (const auto& m : f.modes) modes.push_back(&m);
  for (auto _ : st) {
    std::vector<SolverState> states = f.states;
    solver.step_batch(states, modes);
    benchmark::DoNotOptimize(states.front().xi.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(1));
}

void BM_StepSequential(benchmark::State& st) {
  Fixture f(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
  FixedPointSolver solver(f.sys, ObjectiveMode::Kind::kProjection, {});
  for (auto _ : st) {
    for (std::size_t m = 0; m < f.states.size(); ++m) {
      SolverState next = solver.step(f.states[m], f.modes[m]);
      benchmark::DoNotOptimize(next.xi.data());
    }
  }
  st.SetItemsProcessed(st.iterations() * st.range(1));
}

void BM_KktFactorization(benchmark::State& st) {
  Fixture f(static_cast<int>(st.range(0)), 1);
  for (auto _ : st) {
    KktCache kkt(*f.sys, ObjectiveMode::Kind::kProjection, 1.0);
    benchmark::DoNotOptimize(kkt.solve_map().data());
  }
}

void BM_PlanNaive(benchmark::State& st) {
  Fixture f(static_cast<int>(st.range(0)), 1);
  const CandidateBatch batch = sample_naive_prior(f.scn, f.basis, 64, 3);
  PlanConfig cfg;
  for (auto _ : st) {
    PlanResult r = plan(f.scn, batch, cfg);
    benchmark::DoNotOptimize(r.selected);
  }
}

BENCHMARK(BM_StepBatched)->ArgsProduct({{4, 8, 16}, {1, 8, 32}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_StepSequential)->ArgsProduct({{4, 8, 16}, {1, 8, 32}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_KktFactorization)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_PlanNaive)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
