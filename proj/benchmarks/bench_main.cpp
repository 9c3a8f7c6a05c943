// Copyright 2026 The SAF Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// Micro benchmarks for the hot paths: convolution, bilinear sampling, model
// forward/backward and one attack iteration.

#include <benchmark/benchmark.h>

#include <numeric>

#include "saf/attack.hpp"
#include "saf/autodiff.hpp"
#include "saf/models.hpp"
#include "saf/rng.hpp"
#include "saf/scenes.hpp"
#include "saf/transforms.hpp"

namespace {

using namespace saf;

Tensor random_tensor(Shape shape, uint64_t seed) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform(-1, 1));
  return t;
}

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const int64_t side = state.range(0), channels = state.range(1);
  const Tensor x = random_tensor({1, channels, side, side}, 1);
  const Tensor k = random_tensor({channels, channels, 3, 3}, 2);
  const Tensor b = random_tensor({channels}, 3);
  for (auto _ : state) {
    Tape tape;
    const Var xv = tape.variable(x);
    tape.backward(sum(conv2d(xv, tape.constant(k), tape.constant(b), 1, 1)));
    benchmark::DoNotOptimize(tape.grad(xv));
  }
  state.SetItemsProcessed(state.iterations() * side * side * channels * channels * 9);
}
BENCHMARK(BM_Conv2dForwardBackward)->Args({32, 16})->Args({32, 32})->Args({64, 16});

void BM_RotateImage(benchmark::State& state) {
  const int64_t side = state.range(0);
  const Tensor x = random_tensor({1, 3, side, side}, 4);
  const TransformInstance t(RotateParams{17.0});
  for (auto _ : state) {
    Tape tape;
    const Var xv = tape.variable(x);
    tape.backward(sum(apply_image(t, xv)));
    benchmark::DoNotOptimize(tape.grad(xv));
  }
}
BENCHMARK(BM_RotateImage)->Arg(32)->Arg(64);

void BM_BlockShuffleImage(benchmark::State& state) {
  const Tensor x = random_tensor({1, 3, 32, 32}, 5);
  const TransformInstance t(BlockShuffleParams{3, {4, 0, 8, 1, 7, 2, 6, 3, 5}});
  for (auto _ : state) benchmark::DoNotOptimize(apply_image(t, x));
}
BENCHMARK(BM_BlockShuffleImage);

void BM_ModelLossGradient(benchmark::State& state) {
  const bool detector = state.range(0) == 1;
  const Model model(detector ? ModelArch::detector(4, 32) : ModelArch::segmenter(4), 6);
  const Scene scene = generate_scene(GeneratorConfig{}, 7, "test", 0).scene;
  const std::unique_ptr<Objective> objective =
      detector ? std::unique_ptr<Objective>(new DetObjective(model)) : std::make_unique<SegObjective>(model);
  const AttackLabel label = label_of(scene);
  for (auto _ : state) {
    Tape tape;
    const Var xv = tape.variable(scene.batched_image());
    tape.backward(objective->loss(tape, xv, label).loss);
    benchmark::DoNotOptimize(tape.grad(xv));
  }
  state.SetLabel(detector ? "detector" : "segmenter");
}
BENCHMARK(BM_ModelLossGradient)->Arg(0)->Arg(1);

void BM_AttackIteration(benchmark::State& state) {
  const bool aligned = state.range(0) == 1;
  const Model model(ModelArch::segmenter(4), 8);
  const Scene scene = generate_scene(GeneratorConfig{}, 9, "test", 0).scene;
  const SegObjective objective(model);
  AttackConfig cfg;
  cfg.pipeline = preset_pipeline("bsr_like", 1.0);
  cfg.iterations = 1;
  cfg.aligned = aligned;
  for (auto _ : state) benchmark::DoNotOptimize(run_attack(objective, scene, cfg).x_adv);
  state.SetLabel(aligned ? "SA" : "no-SA");
}
BENCHMARK(BM_AttackIteration)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
