// Microbenchmarks of the classifier's forward and training steps.

#include <benchmark/benchmark.h>

#include <vector>

#include "mret/loss.hpp"
#include "mret/net.hpp"
#include "mret/rng.hpp"

namespace {

mret::Tensor4 random_batch(int n, int side) {
  mret::Tensor4 x(n, 1, side, side);
  mret::Rng rng(2718);
  for (double& v : x.v) v = rng.uniform(-2.0, 2.0);
  return x;
}

void BM_ForwardMicro(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const mret::Model model = mret::init_model(mret::NetArch::micro(side), 1);
  const mret::Tensor4 x = random_batch(8, side);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mret::forward(model, x));
  }
}
BENCHMARK(BM_ForwardMicro)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_TrainStepMicro(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const mret::Model model = mret::init_model(mret::NetArch::micro(side), 1);
  const mret::Tensor4 x = random_batch(8, side);
  const std::vector<int> labels = {1, 0, 0, 0, 1, 0, 0, 0};
  for (auto _ : state) {
    mret::Tape tape;
    const mret::Logits logits = mret::forward(model, x, &tape);
    mret::Logits dlogits;
    mret::weighted_ce(logits, labels, {1.0, 10.0}, &dlogits);
    benchmark::DoNotOptimize(mret::backward(model, tape, dlogits));
  }
}
BENCHMARK(BM_TrainStepMicro)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
