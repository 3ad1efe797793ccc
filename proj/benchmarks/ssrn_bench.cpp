// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "ssrn/training.hpp"

namespace {

using namespace ssrn;

ad::Tensor random_tensor(ad::Shape s, std::uint64_t seed) {
  ad::Tensor t(std::move(s));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  for (auto& v : t.data) {
    v = g(rng);
  }
  return t;
}

void BM_MatmulForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const ad::Tensor a = random_tensor({n, 32}, 1);
  const ad::Tensor b = random_tensor({32, 32}, 2);
  for (auto _ : state) {
    ad::Tape tape;
    const ad::Var x = tape.leaf(a);
    const ad::Var w = tape.leaf(b);
    const ad::Var loss = ad::sum_squares(ad::matmul(x, w));
    tape.backward(loss);
    benchmark::DoNotOptimize(w.grad().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_MatmulForwardBackward)->Arg(256)->Arg(1024);

void BM_MarchForward(benchmark::State& state) {
  const Model model = Model::init(ModelDims{}, 1);
  const CameraView view{Intrinsics::centered(32, 32, 35.2), orbit_pose(2.5, 0.3, 0.3), 32, 32};
  const RayBatch rays = make_ray_batch(rays_for_view(view));
  std::mt19937_64 rng(3);
  const ad::Tensor z = sample_latent(32, rng);
  for (auto _ : state) {
    ad::Tape tape;
    Binding b(tape);
    const ModelVars vars = bind(b, model, {});
    const SceneFunction scene = generate_scene(vars.hyper, tape.constant(z));
    const MarchTrace trace = march(scene, rays, vars.marcher, model.dims);
    benchmark::DoNotOptimize(trace.depth.data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rays.size()));
}
BENCHMARK(BM_MarchForward)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const Model model = Model::init(ModelDims{}, 1);
  const CameraView view{Intrinsics::centered(32, 32, 35.2), orbit_pose(2.5, 0.3, 0.3), 32, 32};
  std::vector<int> pixels(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = static_cast<int>(i % 1024);
  }
  const RayBatch rays = make_ray_batch(view, pixels);
  const ad::Tensor target = ad::Tensor::filled({pixels.size(), 3}, 1.0);
  std::mt19937_64 rng(4);
  const ad::Tensor z = sample_latent(32, rng);
  for (auto _ : state) {
    ad::Tape tape;
    Binding b(tape);
    const ModelVars vars = bind(b, model, Trainable{true, true, true, false});
    const ad::Var code = b("code", z, true);
    const LossTerms terms = scene_loss(vars, code, rays, &target, {}, LossWeights{}, model.dims);
    tape.backward(terms.total);
    benchmark::DoNotOptimize(code.grad().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pixels.size()));
}
BENCHMARK(BM_TrainStep)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_RenderView(benchmark::State& state) {
  const Model model = Model::init(ModelDims{}, 1);
  const int res = static_cast<int>(state.range(0));
  const CameraView view{Intrinsics::centered(res, res, 1.1 * res), orbit_pose(2.5, 0.3, 0.3), res, res};
  std::mt19937_64 rng(5);
  const ad::Tensor z = sample_latent(32, rng);
  for (auto _ : state) {
    const RenderOutput r = render(model, z, view);
    benchmark::DoNotOptimize(r.rgb.data.data());
  }
  state.SetItemsProcessed(state.iterations() * res * res);
}
BENCHMARK(BM_RenderView)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
