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

// Small convolutional segmenter and grid detector, their losses, decoding,
// SGD trainer and binary checkpoints.
//
// Segmenter: stride-1 3x3 convolutions with zero padding and relu, then a
// 1x1 head to C logits per pixel. No pooling, so the network is
// translation-equivariant away from the borders.
//
// Detector: stride-2 convolutions down to a grid of cells `stride` pixels
// wide. Head channels per cell: [objectness, C category logits, l, t, r, b],
// where l/t/r/b are distances in pixels from the cell centre to the box
// edges, kept non-negative by relu and scaled by the stride.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "saf/autodiff.hpp"
#include "saf/scenes.hpp"
#include "saf/tensor.hpp"

namespace saf {

enum class Task { kSegmentation, kDetection };

std::string_view task_name(Task task);
Task task_from_name(std::string_view name);

struct LayerSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  int padding = 1;
  bool relu = true;
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ModelArch {
  Task task = Task::kSegmentation;
  int categories = 4;
  std::vector<LayerSpec> layers;

  /// Product of layer strides; the detector's cell size in pixels.
  int stride() const;
  int head_channels() const;  // C for segmentation, 5 + C for detection
  void validate() const;

  static ModelArch segmenter(int categories, int width = 16, int depth = 4);
  static ModelArch detector(int categories, int width = 24);

  std::string to_json() const;
  static ModelArch from_json(std::string_view text);

  friend bool operator==(const ModelArch&, const ModelArch&) = default;
};

class Model {
 public:
  /// Uniform He initialization from `seed`; biases start at 0.
  Model(ModelArch arch, uint64_t seed);
  /// All parameters zero.
  static Model zeros(ModelArch arch);

  const ModelArch& arch() const { return arch_; }
  Task task() const { return arch_.task; }
  int categories() const { return arch_.categories; }

  /// Logits (B, C, H, W) or head (B, 5 + C, H / s, W / s). Parameters enter
  /// the tape as constants.
  Var forward(Tape& tape, Var x) const;
  /// Same, with parameters recorded as variables; their handles are
  /// appended to `params` in parameters() order.
  Var forward(Tape& tape, Var x, std::vector<Var>& params) const;

  /// kernel0, bias0, kernel1, bias1, ...
  std::vector<Tensor>& parameters() { return params_; }
  const std::vector<Tensor>& parameters() const { return params_; }
  std::vector<std::string> parameter_names() const;

  friend bool operator==(const Model&, const Model&) = default;

 private:
  Model() = default;
  Var forward_impl(Tape& tape, Var x, std::vector<Var>* params) const;

  ModelArch arch_;
  std::vector<Tensor> params_;
};

// ---------------------------------------------------------------------------
// Losses.

struct LossResult {
  Var loss;
  /// True when no pixel or cell was counted; the loss is then +0 with zero
  /// gradient.
  bool empty = false;
};

/// Cross-entropy with ignore label 255.
LossResult seg_loss(Var logits, const LabelMap& mask);

/// Per-cell targets for one image. state: -1 ignored, 0 negative,
/// 1 positive.
struct DetTargets {
  int64_t grid_h = 0, grid_w = 0;
  std::vector<int8_t> state;
  std::vector<int> category;
  std::vector<std::array<float, 4>> ltrb;
};

/// A box is assigned to the cell containing its centre; when several boxes
/// share a cell the smallest one wins. When `valid` is given, a cell whose
/// centre pixel is 255 there is ignored (unless it holds a positive).
DetTargets assign_targets(const BoxSet& boxes, int64_t height, int64_t width, int stride,
                          const LabelMap* valid = nullptr);

/// BCE on objectness over non-ignored cells, plus cross-entropy on the
/// category and smooth-L1 on (offset - target) / stride over positive
/// cells; each term is a mean, weights 1/1/1. head is (B, 5 + C, G, G)
/// and `targets` holds one entry per batch item.
LossResult det_loss(Var head, std::span<const DetTargets> targets, int stride);
LossResult det_loss(Var head, const BoxSet& boxes, int64_t height, int64_t width, int stride,
                    const LabelMap* valid = nullptr);

// ---------------------------------------------------------------------------
// Inference.

/// Per-pixel argmax (first maximum wins), one map per batch item.
LabelMap predict_mask(const Model& model, const Tensor& x);

struct DecodeOptions {
  double score_threshold = 0.3;
  double nms_iou = 0.5;
};

/// Decodes one batch item of a detector head. Cells with
/// sigmoid(objectness) >= threshold become boxes with score
/// sigmoid(objectness) * max softmax; per-category greedy NMS follows,
/// ordered by descending score then cell index.
BoxSet decode_head(const Tensor& head, int64_t batch_index, int stride, int64_t height,
                   int64_t width, int categories, const DecodeOptions& options = {});
BoxSet predict_boxes(const Model& model, const Tensor& x, const DecodeOptions& options = {});

/// Greedy NMS in descending score order, stable on ties. A box is dropped
/// when its IoU with a kept box of the same category exceeds the threshold.
BoxSet nms(BoxSet boxes, double iou_threshold);

// ---------------------------------------------------------------------------
// Training.

struct TrainConfig {
  int epochs = 40;
  int batch_size = 8;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double clip_norm = 5.0;  // global gradient-norm clip; 0 disables
  bool augment = true;     // random horizontal flips of training scenes
  uint64_t seed = 1;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0;
  std::optional<double> val_metric;  // mIoU or mAP@50
};

using TrainProgress = std::function<void(const EpochLog&)>;

/// SGD with momentum; deterministic in (model, scenes, cfg). Throws
/// DivergenceError naming the epoch on a non-finite loss.
std::vector<EpochLog> train(Model& model, const std::vector<Scene>& train_set,
                            const std::vector<Scene>& val_set, const TrainConfig& cfg,
                            const TrainProgress& progress = {});

/// Clean validation metric: mIoU for segmenters, mAP@50 for detectors.
std::optional<double> validation_metric(const Model& model, const std::vector<Scene>& scenes);

// ---------------------------------------------------------------------------
// Checkpoints: little-endian "SAFM", u32 version, u32 arch-JSON length,
// arch JSON, u32 tensor count, then per tensor: u32 name length, name,
// u32 rank, i64 dims, float32 data.

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace saf
