// Microbenchmarks of the volume-to-montage reduction stages.

#include <benchmark/benchmark.h>

#include "mret/montage.hpp"
#include "mret/rng.hpp"
#include "mret/volume.hpp"

namespace {

mret::Volume3D synthetic_volume(int inplane, int z) {
  mret::Volume3D vol;
  vol.dims = {inplane, inplane, z};
  vol.data.resize(vol.voxel_count());
  mret::Rng rng(4711);
  for (float& v : vol.data) v = static_cast<float>(rng.uniform(-1000.0, 1000.0));
  return vol;
}

void BM_MakeMontage(benchmark::State& state) {
  const auto vol = synthetic_volume(64, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(mret::make_montage(vol, mret::WindowSpec{}));
  }
}
BENCHMARK(BM_MakeMontage)->Arg(10)->Arg(36)->Arg(80)->Unit(benchmark::kMillisecond);

void BM_ResampleInplane(benchmark::State& state) {
  const auto vol = synthetic_volume(64, 36);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mret::resample_inplane(vol));
  }
}
BENCHMARK(BM_ResampleInplane)->Unit(benchmark::kMillisecond);

void BM_TileAndDownsample(benchmark::State& state) {
  mret::CanonicalStack stack;
  stack.plan = mret::plan_sampling(36);
  mret::Rng rng(1213);
  for (float& v : stack.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(mret::downsample_montage(mret::tile_montage(stack)));
  }
}
BENCHMARK(BM_TileAndDownsample)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
