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
#include "saf/attack.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

#include "saf/errors.hpp"
#include "saf/rng.hpp"

namespace saf {

AttackLabel label_of(const Scene& scene) { return AttackLabel{scene.mask, scene.boxes, std::nullopt}; }

AttackLabel align_label(const AttackLabel& label, std::span<const TransformInstance> spatial) {
  if (spatial.empty()) return label;
  const int64_t height = label.mask.height, width = label.mask.width;
  AttackLabel out;
  out.mask = apply_mask_chain(spatial, label.mask);
  out.boxes = apply_boxes_chain(spatial, label.boxes, height, width);
  out.valid = apply_mask_chain(spatial, label.valid ? *label.valid : LabelMap(height, width, 0));
  return out;
}

SegObjective::SegObjective(const Model& model) : model_(model) {
  if (model.task() != Task::kSegmentation) throw ConfigError("SegObjective needs a segmenter");
}

LossResult SegObjective::loss(Tape& tape, Var x, const AttackLabel& label) const {
  return seg_loss(model_.forward(tape, x), label.mask);
}

DetObjective::DetObjective(const Model& model) : model_(model) {
  if (model.task() != Task::kDetection) throw ConfigError("DetObjective needs a detector");
}

LossResult DetObjective::loss(Tape& tape, Var x, const AttackLabel& label) const {
  const Var head = model_.forward(tape, x);
  const LabelMap* valid = label.valid ? &*label.valid : nullptr;
  return det_loss(head, label.boxes, x.value().dim(2), x.value().dim(3), model_.arch().stride(), valid);
}

LossResult LinearObjective::loss(Tape&, Var x, const AttackLabel&) const {
  return {sum(mul(x, x.tape().constant(weights_))), false};
}

std::string_view mode_name(AttackMode mode) {
  return mode == AttackMode::kNonTargeted ? "non_targeted" : "targeted";
}

AttackMode mode_from_name(std::string_view name) {
  if (name == "non_targeted") return AttackMode::kNonTargeted;
  if (name == "targeted") return AttackMode::kTargeted;
  throw ConfigError("unknown attack mode '" + std::string(name) + "'");
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0)) throw ConfigError("attack: epsilon must be non-negative");
  if (iterations < 0) throw ConfigError("attack: iterations must be non-negative");
  if (iterations > 0 && !(alpha > 0)) throw ConfigError("attack: alpha must be positive");
  if (counterparts < 1) throw ConfigError("attack: at least one counterpart is required");
  if (!std::isfinite(momentum)) throw ConfigError("attack: momentum must be finite");
  if (mode == AttackMode::kTargeted && !target) throw ConfigError("attack: targeted mode needs a target label");
  if (workers < 0) throw ConfigError("attack: workers must be non-negative");
}

AttackConfig AttackConfig::non_targeted_defaults() { return AttackConfig{}; }

AttackConfig AttackConfig::targeted_defaults() {
  AttackConfig c;
  c.mode = AttackMode::kTargeted;
  c.epsilon = 16.0 / 255.0;
  c.iterations = 100;
  c.alpha = 2.0 * c.epsilon / c.iterations;
  return c;
}

CounterpartResult counterpart_gradient(const Objective& objective, const AttackLabel& label,
                                       const Tensor& x_adv,
                                       std::span<const TransformInstance> instances, bool aligned) {
  Tape tape;
  const Var x = tape.variable(x_adv);
  const Var transformed = apply_image_chain(instances, x);
  const AttackLabel effective = aligned ? align_label(label, spatial_part(instances)) : label;
  const LossResult r = objective.loss(tape, transformed, effective);
  tape.backward(r.loss);
  return {tape.grad(x), static_cast<double>(r.loss.value()[0]), r.empty};
}

std::vector<TransformInstance> counterpart_instances(const AttackConfig& cfg, int t, int k) {
  Rng rng(derive_seed({cfg.seed, static_cast<uint64_t>(t), static_cast<uint64_t>(k)}));
  return sample(cfg.pipeline, rng);
}

namespace {

std::vector<CounterpartResult> all_counterparts(const Objective& objective, const AttackLabel& label,
                                                const Tensor& x_adv, const AttackConfig& cfg, int t) {
  const int n = cfg.counterparts;
  std::vector<CounterpartResult> results(static_cast<size_t>(n));
  auto run = [&](int k) {
    const auto instances = counterpart_instances(cfg, t, k);
    results[static_cast<size_t>(k)] = counterpart_gradient(objective, label, x_adv, instances, cfg.aligned);
  };
  int workers = cfg.workers == 0 ? static_cast<int>(std::thread::hardware_concurrency()) : cfg.workers;
  workers = std::clamp(workers, 1, n);
  if (workers == 1) {
    for (int k = 0; k < n; ++k) run(k);
    return results;
  }
  std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
  std::vector<std::thread> threads;
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (int k = w; k < n; k += workers) run(k);
      } catch (...) {
        errors[static_cast<size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace

AttackResult run_attack(const Objective& objective, const Scene& scene, const AttackConfig& cfg) {
  cfg.validate();
  const Tensor x = scene.batched_image();
  const AttackLabel label = cfg.mode == AttackMode::kTargeted ? *cfg.target : label_of(scene);
  const float eps = static_cast<float>(cfg.epsilon);
  const Tensor lo = clamp(add(x, Tensor(x.shape(), -eps)), 0.0f, 1.0f);
  const Tensor hi = clamp(add(x, Tensor(x.shape(), eps)), 0.0f, 1.0f);
  const float direction = cfg.mode == AttackMode::kNonTargeted ? 1.0f : -1.0f;
  const float step = direction * static_cast<float>(cfg.alpha);

  AttackResult result;
  Tensor x_adv = x;
  std::vector<double> g(static_cast<size_t>(x.numel()), 0.0);
  std::vector<double> mu(static_cast<size_t>(x.numel()));
  for (int t = 1; t <= cfg.iterations; ++t) {
    const auto parts = all_counterparts(objective, label, x_adv, cfg, t);
    IterationRecord rec;
    rec.t = t;
    std::fill(mu.begin(), mu.end(), 0.0);
    for (const auto& p : parts) {
      for (size_t i = 0; i < mu.size(); ++i) mu[i] += p.grad[static_cast<int64_t>(i)];
      rec.mean_loss += p.loss;
      rec.empty_counterparts += p.empty;
    }
    const double n = cfg.counterparts;
    rec.mean_loss /= n;
    if (!std::isfinite(rec.mean_loss)) throw DivergenceError("attack iteration", t);
    double l1 = 0;
    for (double& m : mu) {
      m /= n;
      l1 += std::abs(m);
    }
    rec.grad_l1 = l1;
    rec.skipped_normalization = !(l1 > 0);
    const double inv = rec.skipped_normalization ? 1.0 : 1.0 / l1;
    Tensor stepped = x_adv;
    for (size_t i = 0; i < g.size(); ++i) {
      g[i] = cfg.momentum * g[i] + mu[i] * inv;
      const float s = g[i] > 0 ? 1.0f : (g[i] < 0 ? -1.0f : 0.0f);
      stepped[static_cast<int64_t>(i)] += step * s;
    }
    x_adv = clamp(stepped, lo, hi);
    rec.linf = max_abs_diff(x_adv, x);
    result.trace.push_back(rec);
  }
  result.x_adv = x_adv;
  result.adversarial = scene;
  result.adversarial.image = x_adv.reshaped(scene.image.shape());
  return result;
}

Tensor bit_depth_reduce(const Tensor& x, int bits) {
  if (bits < 1 || bits > 8) throw ConfigError("bit depth must lie in [1, 8]");
  const double levels = std::ldexp(1.0, bits) - 1.0;
  Tensor out = x;
  for (int64_t i = 0; i < out.numel(); ++i) {
    out[i] = static_cast<float>(std::round(static_cast<double>(x[i]) * levels) / levels);
  }
  return out;
}

LabelMap block_target_map(int64_t height, int64_t width, int categories) {
  if (categories < 2) throw ConfigError("target map needs at least two categories");
  LabelMap out(height, width, 0);
  for (int64_t i = 0; i < height; ++i) {
    const int64_t row = std::min<int64_t>(1, i * 2 / height);
    for (int64_t j = 0; j < width; ++j) {
      const int64_t col = std::min<int64_t>(3, j * 4 / width);
      out.at(i, j) = static_cast<uint8_t>((col + 2 * row) % categories);
    }
  }
  return out;
}

std::string format_trace(const std::vector<IterationRecord>& trace) {
  std::ostringstream os;
  os << "# t mean_loss grad_l1 skipped empty linf\n";
  for (const auto& r : trace) {
    os << r.t << ' ' << format_double(r.mean_loss) << ' ' << format_double(r.grad_l1) << ' '
       << (r.skipped_normalization ? 1 : 0) << ' ' << r.empty_counterparts << ' ' << format_double(r.linf)
       << '\n';
  }
  return os.str();
}

}  // namespace saf
