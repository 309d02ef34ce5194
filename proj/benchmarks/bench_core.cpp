#include <benchmark/benchmark.h>

#include "dacl/gradcheck.hpp"
#include "dacl/tape.hpp"
#include "dacl/eval.hpp"

using namespace dacl;

namespace {

void BM_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Matrix a = gradcheck::random_uniform(rng, 8, n, -1.0, 1.0);
  const Matrix b = gradcheck::random_uniform(rng, n, 64, -1.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(matmul(a, b));
  }
  state.SetItemsProcessed(state.iterations() * 8 * n * 64);
}
BENCHMARK(BM_matmul)->Arg(128)->Arg(512)->Arg(2048);

// Sparse batches are mostly zeros; the matmul zero-skip is the reason
// bag-of-words batches stay cheap. Measured at realistic densities.
void BM_matmul_sparse_rows(benchmark::State& state) {
  const double density = static_cast<double>(state.range(0)) / 100.0;
  Rng rng(2);
  Matrix a(8, 2048);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (rng.bernoulli(density)) a(i, j) = 1.0;
    }
  }
  const Matrix b = gradcheck::random_uniform(rng, 2048, 64, -1.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(matmul(a, b));
  }
}
BENCHMARK(BM_matmul_sparse_rows)->Arg(2)->Arg(10)->Arg(100);

Mlp bench_mlp(Rng& rng) {
  return Mlp::init(MlpSpec{512, {256}, 64, OutputActivation::kNone}, rng);
}

void BM_tape_forward(benchmark::State& state) {
  Rng rng(3);
  const Mlp net = bench_mlp(rng);
  const Matrix x = gradcheck::random_uniform(rng, 8, 512, -1.0, 1.0);
  for (auto _ : state) {
    ad::Tape tape;
    const ad::Value out = bind(tape, net, true).forward(tape.leaf_ref(&x));
    benchmark::DoNotOptimize(ad::sum_all(out).payload()(0, 0));
  }
}
BENCHMARK(BM_tape_forward);

void BM_tape_forward_backward(benchmark::State& state) {
  Rng rng(3);
  const Mlp net = bench_mlp(rng);
  const Matrix x = gradcheck::random_uniform(rng, 8, 512, -1.0, 1.0);
  for (auto _ : state) {
    ad::Tape tape;
    const BoundMlp bound = bind(tape, net, true);
    const ad::Value loss = ad::sum_all(bound.forward(tape.leaf_ref(&x)));
    tape.backward(loss);
    benchmark::DoNotOptimize(bound.w[0].grad()(0, 0));
  }
}
BENCHMARK(BM_tape_forward_backward);

SplitDataset bench_view() {
  SynthSpec spec;
  spec.n_domains = 3;
  spec.vocab = 500;
  spec.shared_words = 10;
  spec.flipped_words = 30;
  spec.labeled_per_domain = 40;
  spec.unlabeled_per_domain = 40;
  spec.background_tokens = 30;
  spec.shared_hi = 0.35;
  spec.shared_lo = 0.15;
  spec.seed = 4;
  return ratio_view(generate_synthetic(spec), 1);
}

TrainConfig bench_cfg() {
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.batch = 8;
  cfg.seed = 1;
  cfg.shared_dim = 16;
  cfg.domain_dim = 8;
  cfg.extractor_hidden = {64};
  cfg.c1_hidden = 16;
  cfg.c2_hidden = 12;
  cfg.d_hidden = 16;
  return cfg;
}

void BM_train_iteration(benchmark::State& state) {
  const SplitDataset view = bench_view();
  Trainer t(view, bench_cfg());
  for (auto _ : state) {
    const Batches b = t.sample();
    t.l_step(b);
    t.a_step(b);
    t.r_step(b);
  }
}
BENCHMARK(BM_train_iteration);

void BM_l_step(benchmark::State& state) {
  const SplitDataset view = bench_view();
  Trainer t(view, bench_cfg());
  const Batches b = t.sample();
  for (auto _ : state) {
    benchmark::DoNotOptimize(t.l_step(b).lc1);
  }
}
BENCHMARK(BM_l_step);

}  // namespace

BENCHMARK_MAIN();
