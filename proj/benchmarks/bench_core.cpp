#include <benchmark/benchmark.h>

#include <xorlab/eval.hpp>
#include <xorlab/theory.hpp>
#include <xorlab/trainer.hpp>

using namespace xorlab;

namespace {

struct Fixture {
  XorBasis basis;
  Dataset ds;
  CnnWeights w;
};

Fixture make_fixture(int n, int d, int m) {
  Rng rng(42);
  Fixture f;
  f.basis = build_basis(d, std::pow(static_cast<double>(d) / 0.2, 0.25), 0.8, rng);
  f.ds = sample_dataset(f.basis, {n, 1.0, 0.1, 42}, rng);
  f.w = init_weights(m, d, 0.01, rng);
  return f;
}

}  // namespace

static void BM_SampleDataset(benchmark::State& state) {
  Rng rng(1);
  const XorBasis basis = build_basis(200, 2.0, 0.8, rng);
  for (auto _ : state) {
    Rng r(7);
    benchmark::DoNotOptimize(sample_dataset(basis, {static_cast<int>(state.range(0)), 1.0, 0.1, 7}, r));
  }
}
BENCHMARK(BM_SampleDataset)->Arg(80)->Arg(400);

static void BM_ForwardBatch(benchmark::State& state) {
  Fixture f = make_fixture(static_cast<int>(state.range(0)), 200, 40);
  for (auto _ : state) benchmark::DoNotOptimize(forward_batch(f.w, f.ds));
}
BENCHMARK(BM_ForwardBatch)->Arg(80)->Arg(400);

static void BM_GdStep(benchmark::State& state) {
  Fixture f = make_fixture(static_cast<int>(state.range(0)), 200, 40);
  for (auto _ : state) {
    gd_step(f.w, f.ds, 1e-3);
    benchmark::DoNotOptimize(f.w.w_pos.data());
  }
}
BENCHMARK(BM_GdStep)->Arg(80)->Arg(400);

static void BM_SolveContinuous(benchmark::State& state) {
  const ComparisonSeq seq{1.0, 0.5, 0.0};
  double t = 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_continuous(seq, t));
    t += 1.0;
    if (t > 1e4) t = 1.0;
  }
}
BENCHMARK(BM_SolveContinuous);

static void BM_TestErrorMc(benchmark::State& state) {
  Fixture f = make_fixture(80, 200, 40);
  for (auto _ : state) {
    Rng rng(11);
    benchmark::DoNotOptimize(test_error_mc(f.w, f.basis, 1.0, 0.1, 1000, rng));
  }
}
BENCHMARK(BM_TestErrorMc);

BENCHMARK_MAIN();
