#include <benchmark/benchmark.h>

#include "bdsde/cond_exp.hpp"
#include "bdsde/forward.hpp"
#include "bdsde/noise.hpp"
#include "bdsde/presets.hpp"
#include "bdsde/regression.hpp"

namespace {

using namespace bdsde;

ExecMode mode_of(const benchmark::State& state) {
  return state.range(0) == 0 ? ExecMode::serial : ExecMode::parallel;
}

void BM_sample_noise(benchmark::State& state) {
  const Partition part = make_uniform_partition(1.0, 64);
  for (auto _ : state) {
    NoiseGrid grid = sample_noise(part, 20000, 1, 1, BMode::frozen, 7, mode_of(state));
    benchmark::DoNotOptimize(grid.dW.data());
  }
}

void BM_simulate_forward(benchmark::State& state) {
  const Preset preset = make_preset("geometric");
  const Partition part = make_uniform_partition(1.0, 64);
  const NoiseGrid noise = sample_noise(part, 20000, 1, 1, BMode::frozen, 7);
  for (auto _ : state) {
    ForwardEnsemble ens = simulate_forward(preset.spec, noise, mode_of(state));
    benchmark::DoNotOptimize(ens.states.data());
  }
}

void BM_quadrature_estimate(benchmark::State& state) {
  const Preset preset = make_preset("quad");
  const Partition part = make_uniform_partition(1.0, 16);
  const NoiseGrid noise = sample_noise(part, 20000, 1, 1, BMode::frozen, 7);
  const ForwardEnsemble ens = simulate_forward(preset.spec, noise);
  const std::vector<double> grid = make_uniform_grid(-6.0, 6.0, 257);
  const QuadratureProvider provider(preset.spec, noise, grid, {}, mode_of(state));
  const std::size_t i = 8;
  std::vector<double> targets(noise.paths), states(noise.paths), out(noise.paths);
  for (std::size_t p = 0; p < noise.paths; ++p) {
    states[p] = ens.state(p, i - 1, 0);
    targets[p] = ens.state(p, i, 0);
  }
  CondExpRequest req;
  req.step = i;
  req.kind = CondExpRequest::Kind::tilde_y;
  req.targets = targets;
  req.cond_states = states;
  req.db = noise.db_row(0, i);
  for (auto _ : state) {
    provider.estimate(req, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_lsmc_fit(benchmark::State& state) {
  const Partition part = make_uniform_partition(1.0, 8);
  const NoiseGrid noise = sample_noise(part, 50000, 1, 1, BMode::frozen, 7);
  std::vector<double> x(noise.paths), t(noise.paths);
  for (std::size_t p = 0; p < noise.paths; ++p) {
    x[p] = noise.dw(p, 1, 0);
    t[p] = x[p] * x[p] + noise.dw(p, 2, 0);
  }
  RegressionSpec spec;
  spec.degree = 3;
  for (auto _ : state) {
    std::vector<double> fit = lsmc_fit(t, x, 1, spec);
    benchmark::DoNotOptimize(fit.data());
  }
}

BENCHMARK(BM_sample_noise)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_simulate_forward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_quadrature_estimate)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_lsmc_fit)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
