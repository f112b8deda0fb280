#include <benchmark/benchmark.h>

#include <cmath>

#include "hcw/cell.hpp"
#include "hcw/corrector.hpp"
#include "hcw/macromodel.hpp"
#include "hcw/microsim.hpp"
#include "hcw/rng.hpp"

namespace {

void BM_EffectiveParameters(benchmark::State& state) {
  const auto cell = hcw::build_cell(hcw::appendix2_config(
      {.drift_k = 1.0, .hold = 0.5, .bulk_exchange = 2.0, .astral_exchange = 0.25, .absorption = 1}));
  for (auto _ : state) benchmark::DoNotOptimize(hcw::compute_effective(cell));
}
BENCHMARK(BM_EffectiveParameters);

void BM_MicroStep(benchmark::State& state) {
  const auto cell = hcw::build_cell(hcw::appendix2_config());
  const hcw::MicroWalker walker(hcw::assemble_transition(cell, 1.0 / 32.0));
  auto rng = hcw::make_stream(1, 0);
  const int start[2] = {0, 0};
  auto s = walker.make_state(start);
  for (auto _ : state) {
    walker.advance(s, rng);
    benchmark::DoNotOptimize(s.site);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_MicroStep);

void BM_LabelChain(benchmark::State& state) {
  const auto eff = hcw::compute_effective(hcw::build_cell(hcw::appendix2_config(
      {.drift_k = 0.5, .hold = 0.5, .bulk_exchange = 2.0, .astral_exchange = 0.25, .absorption = 1})));
  const Eigen::Vector3d p0(1, 0, 0);
  for (auto _ : state) benchmark::DoNotOptimize(hcw::evolve_label_chain(eff.generator, p0, 1.0));
}
BENCHMARK(BM_LabelChain);

void BM_CrankNicolsonSteps(benchmark::State& state) {
  const hcw::MacroCoefficients c{.theta = 0.3, .b = 0.8, .lambda0 = 1.5, .lambda1 = 0.9, .m = 0.6};
  hcw::MacroFields init;
  init.grid = {20.0, static_cast<std::size_t>(state.range(0)), hcw::Boundary::Periodic};
  init.rho0.resize(init.grid.n);
  init.rho1.assign(init.grid.n, 0.0);
  for (std::size_t i = 0; i < init.grid.n; ++i) init.rho0[i] = std::exp(-std::pow(init.grid.x(i) - 10.0, 2));
  const hcw::MacroSolverOptions o{.t_end = 0.1, .dt = 1e-3};
  for (auto _ : state) benchmark::DoNotOptimize(hcw::solve_macro_system(c, init, o));
  state.SetItemsProcessed(state.iterations() * 100 * state.range(0));
}
BENCHMARK(BM_CrankNicolsonSteps)->Arg(256)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
