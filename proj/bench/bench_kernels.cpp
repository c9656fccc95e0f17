// Serial reference kernels against their OpenMP counterparts, plus the
// per-example parallel batch gradient against the single-worker path.
#include <benchmark/benchmark.h>

#include <random>

#include "aair/data.hpp"
#include "aair/kernels.hpp"
#include "aair/model.hpp"
#include "aair/trainer.hpp"

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_values(n * n, 1), b = random_values(n * n, 2);
  std::vector<double> c(n * n);
  const aair::kernels::GemmArgs args{n, n, n};
  for (auto _ : state) {
    if constexpr (Parallel) aair::kernels::gemm(args, a, b, c);
    else aair::kernels::ref::gemm(args, a, b, c);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}
BENCHMARK(BM_Gemm<false>)->Name("gemm/serial")->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(BM_Gemm<true>)->Name("gemm/openmp")->Arg(64)->Arg(256)->Arg(512);

template <bool Parallel>
void BM_Gemv(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_values(n * n, 3), x = random_values(n, 4);
  std::vector<double> y(n);
  for (auto _ : state) {
    if constexpr (Parallel) aair::kernels::gemv(n, n, a, x, y, false);
    else aair::kernels::ref::gemv(n, n, a, x, y, false);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_Gemv<false>)->Name("gemv/serial")->Arg(128)->Arg(512)->Arg(2048);
BENCHMARK(BM_Gemv<true>)->Name("gemv/openmp")->Arg(128)->Arg(512)->Arg(2048);

void BM_BatchGradient(benchmark::State& state) {
  const auto workers = static_cast<std::size_t>(state.range(0));
  aair::SyntheticConfig cfg;
  cfg.n_examples = 32;
  const auto raw = aair::generate_synthetic(cfg);
  const auto vocab = aair::Vocabulary::build(raw);
  const auto examples = aair::encode_examples(raw, vocab);
  auto hyper = aair::HyperParams::desk();
  hyper.vocab_size = vocab.size();
  const auto params = aair::init_params(hyper, 1);
  auto grads = aair::zeros_like(params);
  const auto batch = aair::make_batches(examples, 32, 0, false).front();
  aair::GradientWorkspace ws(params, workers);
  for (auto _ : state) benchmark::DoNotOptimize(ws.compute(params, batch, hyper, 7, grads));
}
BENCHMARK(BM_BatchGradient)->Name("batch_gradient/workers")->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
