#include <benchmark/benchmark.h>

#include "hgo/blocks.hpp"
#include "hgo/graph.hpp"
#include "hgo/ops.hpp"
#include "hgo/pipeline.hpp"

using namespace hgo;

namespace {

Tensor rand_input(Shape shape, std::uint64_t seed) {
  auto t = make_tensor<float>(shape);
  Rng rng(seed);
  for (auto& v : t->data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

void bench_block(benchmark::State& state, Block& block, Shape in_shape) {
  block.init(1);
  auto x = rand_input(in_shape, 2);
  for (auto _ : state) {
    auto y = block.forward(x, false);
    benchmark::DoNotOptimize(y->data.data());
  }
}

}  // namespace

static void BM_Conv3x3(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  ConvBNAct block("c", ConvSpec{c, c, 3, 1, 1, 1, false}, Act::Silu);
  bench_block(state, block, {1, c, 40, 40});
}
BENCHMARK(BM_Conv3x3)->Arg(32)->Arg(64);

static void BM_GhostConv(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  GhostConv block("g", GhostSpec{c, c, 2, 3, 1});
  bench_block(state, block, {1, c, 40, 40});
}
BENCHMARK(BM_GhostConv)->Arg(32)->Arg(64);

static void BM_PConv(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  PConv block("p", c, 0.25, 3);
  bench_block(state, block, {1, c, 40, 40});
}
BENCHMARK(BM_PConv)->Arg(32)->Arg(64);

static void BM_HGBlock(benchmark::State& state) {
  HGBlockSpec spec;
  spec.in_channels = 32;
  spec.mid_channels = 16;
  spec.out_channels = 64;
  spec.layer_num = 6;
  spec.use_ghost = state.range(0) == 1;
  HGBlock block(spec.use_ghost ? "ghost" : "dense", spec);
  bench_block(state, block, {1, 32, 20, 20});
}
BENCHMARK(BM_HGBlock)->Arg(0)->Arg(1);

static void BM_SPPF(benchmark::State& state) {
  SPPF block("s", 64);
  bench_block(state, block, {1, 64, 20, 20});
}
BENCHMARK(BM_SPPF);

static void BM_C2f(benchmark::State& state) {
  C2f block("c", 32, 32, static_cast<int>(state.range(0)), true);
  bench_block(state, block, {1, 32, 20, 20});
}
BENCHMARK(BM_C2f)->Arg(1)->Arg(3);

static void BM_ModelForward(benchmark::State& state) {
  ModelConfig mc;
  mc.scale = "n";
  mc.backbone = state.range(0) == 0 ? "c2f-baseline" : "hgnetv2";
  mc.num_classes = 4;
  mc.input_size = 160;
  ModelGraph g = build_model(mc, 1);
  auto x = rand_input({1, 3, 160, 160}, 3);
  for (auto _ : state) {
    auto maps = g.forward(x, false);
    benchmark::DoNotOptimize(maps[0]->data.data());
  }
}
BENCHMARK(BM_ModelForward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_Nms(benchmark::State& state) {
  Rng rng(4);
  std::vector<Detection> dets;
  for (int i = 0; i < 600; ++i) {
    const float x1 = static_cast<float>(rng.uniform(0, 600));
    const float y1 = static_cast<float>(rng.uniform(0, 600));
    const float w = static_cast<float>(rng.uniform(5, 40));
    dets.push_back({Box{x1, y1, x1 + w, y1 + w}, rng.uniform_int(0, 3), rng.uniform(0.05, 1.0)});
  }
  RunConfig cfg;
  for (auto _ : state) {
    auto kept = nms(dets, cfg);
    benchmark::DoNotOptimize(kept.data());
  }
}
BENCHMARK(BM_Nms);

BENCHMARK_MAIN();
