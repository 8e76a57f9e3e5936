#include <benchmark/benchmark.h>

#include <map>
#include <memory>

#include "lumber/posterior.hpp"
#include "lumber/simulator.hpp"

using namespace lumber;

namespace {

struct Fixture {
  std::unique_ptr<PosteriorModel> model;
  Eigen::VectorXd z;
};

// One model and state per dataset size, built on first use.
Fixture& fixture(int n) {
  static std::map<int, Fixture> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    SimConfig sim;
    sim.n = n;
    sim.seed = 7;
    const auto data = generate_dataset(sim);
    Fixture f;
    f.model = std::make_unique<PosteriorModel>(data.specimens, sim.grid);
    Rng rng(8);
    f.z = f.model->initial_state(rng);
    it = cache.emplace(n, std::move(f)).first;
  }
  return it->second;
}

void BM_Reference(benchmark::State& state) {
  Fixture& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(f.model->log_posterior_reference(f.z));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void fused(benchmark::State& state, int threads) {
  Fixture& f = fixture(static_cast<int>(state.range(0)));
  f.model->set_num_threads(threads);
  Eigen::VectorXd grad(f.z.size());
  for (auto _ : state) {
    benchmark::DoNotOptimize(f.model->log_density_gradient(f.z, grad));
    benchmark::ClobberMemory();
  }
  f.model->set_num_threads(0);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_FusedSerial(benchmark::State& state) { fused(state, 1); }
void BM_FusedParallel(benchmark::State& state) { fused(state, 0); }

}  // namespace

// Reference: value only. Fused: value and full gradient.
BENCHMARK(BM_Reference)->Arg(30)->Arg(120)->Arg(360)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_FusedSerial)->Arg(30)->Arg(120)->Arg(360)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_FusedParallel)->Arg(30)->Arg(120)->Arg(360)->Unit(benchmark::kMicrosecond)->UseRealTime();

BENCHMARK_MAIN();
