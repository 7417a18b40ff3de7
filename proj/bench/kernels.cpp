#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>

#include "pnrate/phase_grid.hpp"
#include "pnrate/trellis.hpp"

using namespace pnrate;

namespace {

std::vector<double> random_vector(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

void BM_circulant_fft(benchmark::State& state) {
  const auto S = static_cast<std::size_t>(state.range(0));
  const CirculantKernel k(transition_row(S, 0.01));
  auto v = random_vector(S, 1);
  std::vector<double> u(S);
  for (auto _ : state) {
    k.apply(v, u);
    benchmark::DoNotOptimize(u.data());
  }
}
BENCHMARK(BM_circulant_fft)->RangeMultiplier(2)->Range(16, 256);

void BM_circulant_direct(benchmark::State& state) {
  const auto S = static_cast<std::size_t>(state.range(0));
  const auto q = transition_row(S, 0.01);
  auto v = random_vector(S, 1);
  for (auto _ : state) benchmark::DoNotOptimize(circulant_apply_direct(q, v));
}
BENCHMARK(BM_circulant_direct)->RangeMultiplier(2)->Range(16, 256);

ChannelConfig marginal_config(std::size_t L) {
  return make_channel_config(PulseKind::square, make_constellation("16-QAM"), 0.25, 20.0, L, 256, 200, 1);
}

void BM_marginal(benchmark::State& state, MarginalRoute route) {
  const auto L = static_cast<std::size_t>(state.range(0));
  const auto S = static_cast<std::size_t>(state.range(1));
  const auto cfg = marginal_config(L);
  const PhaseGrid grid(S, cfg.sigma2_W());
  const auto model = multisample_model(cfg, grid);
  const auto rec = simulate(cfg);
  for (auto _ : state) benchmark::DoNotOptimize(forward_marginal(model, rec.y, cfg.constellation, route));
}
BENCHMARK_CAPTURE(BM_marginal, propagate, MarginalRoute::propagate)
    ->Args({4, 32})->Args({8, 32})->Args({8, 64})->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_marginal, block_kernel, MarginalRoute::block_kernel)
    ->Args({4, 32})->Args({8, 32})->Args({8, 64})->Unit(benchmark::kMillisecond);

void BM_marginal_direct_transition(benchmark::State& state) {
  const auto cfg = marginal_config(8);
  const PhaseGrid grid(64, cfg.sigma2_W());
  auto model = multisample_model(cfg, grid);
  model.transition = std::make_shared<DirectCirculantTransition>(transition_row(64, cfg.sigma2_W()));
  const auto rec = simulate(cfg);
  for (auto _ : state) benchmark::DoNotOptimize(forward_marginal(model, rec.y, cfg.constellation));
}
BENCHMARK(BM_marginal_direct_transition)->Unit(benchmark::kMillisecond);

// Seeds of one cell: serial loop vs the OpenMP fan-out with `threads` workers.
void BM_seeds(benchmark::State& state) {
  const int threads = static_cast<int>(state.range(0));
  auto cfg = make_channel_config(PulseKind::square, make_constellation("QPSK"), 0.25, 10.0, 4, 64, 500, 1);
  const PhaseGrid grid(32, cfg.sigma2_W());
  const int saved = omp_get_max_threads();
  omp_set_num_threads(threads);
  for (auto _ : state) benchmark::DoNotOptimize(multi_seed_rate(cfg, grid, 8, 1.0).mean);
  omp_set_num_threads(saved);
  state.counters["threads"] = threads;
}
BENCHMARK(BM_seeds)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
