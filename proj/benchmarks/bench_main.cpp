#include <benchmark/benchmark.h>

#include <random>

#include "sculpt/pipeline.hpp"

namespace {

using namespace sculpt;

CameraPose pose_of(int size) {
  CameraPose p;
  p.image_size = size;
  return p;
}

LatentCode seeded(const ToyGenerator& gen, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return gen.sample_latent(rng);
}

void BM_Decode(benchmark::State& state) {
  const ToyGenerator gen(GeneratorConfig{});
  const LatentCode w = seeded(gen, 1);
  for (auto _ : state) benchmark::DoNotOptimize(gen.decode(w));
}
BENCHMARK(BM_Decode);

void BM_Render(benchmark::State& state) {
  const ToyGenerator gen(GeneratorConfig{});
  const LatentCode w = seeded(gen, 1);
  const CameraPose pose = pose_of(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(gen.render(w, pose, RenderQuality{}));
}
BENCHMARK(BM_Render)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_RenderVjp(benchmark::State& state) {
  const ToyGenerator gen(GeneratorConfig{});
  const LatentCode w = seeded(gen, 1);
  const CameraPose pose = pose_of(static_cast<int>(state.range(0)));
  const RenderedView view = gen.render(w, pose, RenderQuality{});
  ViewCotangent ct = ViewCotangent::zeros_like(view);
  for (double& c : ct.rgb.data) c = 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(gen.render_vjp(w, pose, RenderQuality{}, ct));
}
BENCHMARK(BM_RenderVjp)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_EstimateLighting(benchmark::State& state) {
  const ToyGenerator gen(GeneratorConfig{});
  const RenderedView view = gen.render(seeded(gen, 2), pose_of(64), RenderQuality{});
  for (auto _ : state) benchmark::DoNotOptimize(estimate_lighting(view, 1e-6));
}
BENCHMARK(BM_EstimateLighting)->Unit(benchmark::kMicrosecond);

void BM_ComposeObjective(benchmark::State& state) {
  PipelineContext ctx(GeneratorConfig{}, EncoderSeeds{}, PipelineSettings{});
  const LatentCode input = seeded(ctx.generator, 3);
  const Image x = ctx.generator.render(input, ctx.settings.base_pose, ctx.settings.quality).rgb;
  ctx.register_prompt("p", ctx.generator.render(seeded(ctx.generator, 4), ctx.settings.base_pose,
                                                ctx.settings.quality).rgb, 0.25);
  ObjectiveSpec spec;
  spec.weights = {0.2, 0.2, 2e-5, 1.0, 0.0};
  spec.prompt = "p";
  spec.input_image = x;
  spec.input_pose = ctx.settings.base_pose;
  spec.target_light = SHLighting{{2.0, 0.3, 0.3, 0.1, 0, 0, 0, 0, 0}, LightingFrame::World};
  std::mt19937_64 rng(5);
  for (auto _ : state) benchmark::DoNotOptimize(compose_objective(ctx, ctx.stats.mean, spec, rng));
}
BENCHMARK(BM_ComposeObjective)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
