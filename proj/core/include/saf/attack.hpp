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
#pragma once

// Momentum sign-gradient attack averaged over transformed counterparts.
//
// Per iteration t and counterpart k, a list of transform instances is drawn
// from a stream seeded by (seed, t, k), so aligned and unaligned runs see
// the same transforms. The counterpart loss is J(f(T(x_adv)), y*), with
// y* = T_s(y) when aligned and y* = y otherwise. The mean gradient over the
// N counterparts is L1-normalized into the momentum buffer
//   g <- lambda * g + mu / ||mu||_1
// and the iterate moves by direction * alpha * sign(g), where direction is
// +1 (ascend J) for non-targeted and -1 (descend J) for targeted attacks.
// The result is projected onto the L-inf ball of radius epsilon around x
// and clamped to [0, 1].

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "saf/autodiff.hpp"
#include "saf/models.hpp"
#include "saf/scenes.hpp"
#include "saf/tensor.hpp"
#include "saf/transforms.hpp"

namespace saf {

/// The structured label an objective compares against. `valid` marks
/// pixels exposed by spatial transforms (255) and is set only on aligned
/// labels.
struct AttackLabel {
  LabelMap mask;
  BoxSet boxes;
  std::optional<LabelMap> valid;
};

AttackLabel label_of(const Scene& scene);

/// T_s(y): the mask, the boxes and a validity map moved by the spatial
/// instances.
AttackLabel align_label(const AttackLabel& label, std::span<const TransformInstance> spatial);

/// Scalar attack loss of a (transformed) batch-1 input.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual LossResult loss(Tape& tape, Var x, const AttackLabel& label) const = 0;
};

class SegObjective : public Objective {
 public:
  explicit SegObjective(const Model& model);
  LossResult loss(Tape& tape, Var x, const AttackLabel& label) const override;

 private:
  const Model& model_;
};

/// Detection loss. Exposed positions of an aligned label are ignored when
/// assigning negatives.
class DetObjective : public Objective {
 public:
  explicit DetObjective(const Model& model);
  LossResult loss(Tape& tape, Var x, const AttackLabel& label) const override;

 private:
  const Model& model_;
};

/// J(x) = sum(w * x); used to check the update rule in closed form.
class LinearObjective : public Objective {
 public:
  explicit LinearObjective(Tensor weights) : weights_(std::move(weights)) {}
  LossResult loss(Tape& tape, Var x, const AttackLabel& label) const override;

 private:
  Tensor weights_;
};

enum class AttackMode { kNonTargeted, kTargeted };

std::string_view mode_name(AttackMode mode);
AttackMode mode_from_name(std::string_view name);

struct AttackConfig {
  double epsilon = 10.0 / 255.0;
  double alpha = 1.0 / 255.0;
  int iterations = 10;
  double momentum = 1.0;
  int counterparts = 10;
  TransformPipeline pipeline;
  bool aligned = true;
  AttackMode mode = AttackMode::kNonTargeted;
  std::optional<AttackLabel> target;  // required in targeted mode
  uint64_t seed = 0;
  int workers = 1;  // threads for counterpart gradients; 0 = hardware

  void validate() const;

  static AttackConfig non_targeted_defaults();
  /// epsilon 16/255, L = 100, alpha = 2 * epsilon / L.
  static AttackConfig targeted_defaults();
};

struct CounterpartResult {
  Tensor grad;
  double loss = 0;
  bool empty = false;  // every label position ignored
};

/// Gradient of one counterpart loss with respect to x_adv, through the
/// transform chain.
CounterpartResult counterpart_gradient(const Objective& objective, const AttackLabel& label,
                                       const Tensor& x_adv,
                                       std::span<const TransformInstance> instances, bool aligned);

/// The instances of counterpart k at iteration t (1-based).
std::vector<TransformInstance> counterpart_instances(const AttackConfig& cfg, int t, int k);

struct IterationRecord {
  int t = 0;
  double mean_loss = 0;
  double grad_l1 = 0;
  bool skipped_normalization = false;  // mean gradient was exactly zero
  int empty_counterparts = 0;
  double linf = 0;  // ||x_adv - x||_inf after the step
};

struct AttackResult {
  Tensor x_adv;  // (1, 3, H, W)
  std::vector<IterationRecord> trace;
  /// The scene with its image replaced by the adversarial one.
  Scene adversarial;
};

AttackResult run_attack(const Objective& objective, const Scene& scene, const AttackConfig& cfg);

/// round(x * (2^bits - 1)) / (2^bits - 1), bits in [1, 8].
Tensor bit_depth_reduce(const Tensor& x, int bits);

/// A target map of eight rectangular blocks, two rows of four. Block
/// (row, col) gets category (col + 2 * row) mod C.
LabelMap block_target_map(int64_t height, int64_t width, int categories);

/// Trace grammar: header line, then one line per iteration
/// "t mean_loss grad_l1 skipped empty linf".
std::string format_trace(const std::vector<IterationRecord>& trace);

}  // namespace saf
