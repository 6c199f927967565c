// Serial reference kernels against their OpenMP versions, plus the
// reconstruction benchmark at different thread caps.

#include <benchmark/benchmark.h>

#include <vector>

#include "edict/diagnostics.hpp"
#include "edict/fixtures.hpp"
#include "edict/kernels.hpp"
#include "edict/parallel.hpp"
#include "edict/rng.hpp"

namespace {

using namespace edict;

struct Buffers {
  std::vector<double> x, y, out;

  explicit Buffers(std::size_t n) : x(n), y(n), out(n) {
    SeededRng rng(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.normal();
      y[i] = rng.normal();
    }
  }
};

template <auto Kernel>
void elementwise(benchmark::State& state) {
  Buffers b(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    Kernel(0.93, b.x, b.y, b.out);
    benchmark::DoNotOptimize(b.out.data());
    benchmark::ClobberMemory();
  }
  state.SetBytesProcessed(state.iterations() * state.range(0) * 3 * static_cast<std::int64_t>(sizeof(double)));
}

template <auto Kernel>
void axpby(benchmark::State& state) {
  Buffers b(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    Kernel(0.9, b.x, -0.3, b.y, b.out);
    benchmark::DoNotOptimize(b.out.data());
    benchmark::ClobberMemory();
  }
  state.SetBytesProcessed(state.iterations() * state.range(0) * 3 * static_cast<std::int64_t>(sizeof(double)));
}

template <auto Kernel>
void dot(benchmark::State& state) {
  Buffers b(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(b.x, b.y));
  state.SetBytesProcessed(state.iterations() * state.range(0) * 2 * static_cast<std::int64_t>(sizeof(double)));
}

template <auto Kernel>
void matvec(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Buffers m(n * n);
  Buffers v(n);
  for (auto _ : state) {
    Kernel(m.x, n, n, v.x, v.out);
    benchmark::DoNotOptimize(v.out.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

void sizes(benchmark::internal::Benchmark* b) { b->RangeMultiplier(8)->Range(1 << 10, 1 << 22); }

BENCHMARK(elementwise<kernels::serial::mix>)->Name("mix/serial")->Apply(sizes);
BENCHMARK(elementwise<kernels::omp::mix>)->Name("mix/omp")->Apply(sizes);
BENCHMARK(elementwise<kernels::serial::unmix>)->Name("unmix/serial")->Apply(sizes);
BENCHMARK(elementwise<kernels::omp::unmix>)->Name("unmix/omp")->Apply(sizes);
BENCHMARK(axpby<kernels::serial::axpby>)->Name("axpby/serial")->Apply(sizes);
BENCHMARK(axpby<kernels::omp::axpby>)->Name("axpby/omp")->Apply(sizes);
BENCHMARK(dot<kernels::serial::dot>)->Name("dot/serial")->Apply(sizes);
BENCHMARK(dot<kernels::omp::dot>)->Name("dot/omp")->Apply(sizes);
BENCHMARK(matvec<kernels::serial::matvec>)->Name("matvec/serial")->RangeMultiplier(4)->Range(64, 2048);
BENCHMARK(matvec<kernels::omp::matvec>)->Name("matvec/omp")->RangeMultiplier(4)->Range(64, 2048);

// Whole reconstruction grid (16 mixture inputs, four methods) with the
// OpenMP team capped at range(0) threads.
void recon_grid(benchmark::State& state) {
  const int before = parallel::max_threads();
  parallel::set_max_threads(static_cast<int>(state.range(0)));
  ScheduleParams params;
  const NoiseSchedule schedule = build_schedule(params);
  const GaussianScoreEps model(make_mixture_components(MixtureSpec{}), schedule);
  SeededRng rng(0);
  std::vector<Tensor> inputs;
  std::vector<Condition> conds;
  for (const auto& d : sample_mixture(model.components(), 16, rng)) {
    inputs.push_back(d.x0);
    conds.push_back(d.cond);
  }
  for (auto _ : state) benchmark::DoNotOptimize(recon_benchmark(inputs, conds, schedule, model, ReconConfig{}));
  parallel::set_max_threads(before);
}
BENCHMARK(recon_grid)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
