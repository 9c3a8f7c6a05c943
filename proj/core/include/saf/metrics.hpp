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

// Segmentation and detection criteria.
//
// IoU is accumulated over the whole dataset (one confusion count per
// category), not averaged per image. A category whose union is empty is
// left out of the mean. Detection AP follows the COCO recipe: greedy
// matching in descending score order, 101 recall points, IoU thresholds
// 0.50:0.05:0.95. Undefined results are std::nullopt rather than 0.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "saf/scenes.hpp"
#include "saf/tensor.hpp"

namespace saf {

/// Dataset-level confusion counts. Pixels whose ground truth is 255 are
/// skipped.
class IouAccumulator {
 public:
  explicit IouAccumulator(int categories);

  void add(const LabelMap& pred, const LabelMap& gt);

  int categories() const { return categories_; }
  /// IoU per category; nullopt where the union is empty.
  std::vector<std::optional<double>> per_category() const;
  std::optional<double> miou() const;

 private:
  int categories_;
  std::vector<int64_t> intersection_;
  std::vector<int64_t> pred_count_;
  std::vector<int64_t> gt_count_;
};

struct IouResult {
  std::vector<std::optional<double>> per_category;
  std::optional<double> miou;
};

IouResult miou(std::span<const LabelMap> preds, std::span<const LabelMap> gts, int categories);
IouResult miou(const LabelMap& pred, const LabelMap& gt, int categories);

inline constexpr std::array<double, 10> kIouThresholds{0.50, 0.55, 0.60, 0.65, 0.70,
                                                        0.75, 0.80, 0.85, 0.90, 0.95};

struct ApResult {
  /// AP at each threshold, averaged over categories with at least one
  /// ground-truth box; nullopt when there is no ground truth at all.
  std::array<std::optional<double>, 10> per_threshold{};
  std::optional<double> map;    // mean over the 10 thresholds
  std::optional<double> map50;  // threshold 0.50 only
  std::vector<int> evaluated_categories;
};

/// preds[i] and gts[i] belong to image i. Prediction boxes must carry a
/// score; gts must not.
ApResult map_50_95(std::span<const BoxSet> preds, std::span<const BoxSet> gts, int categories);

/// AP of one category at one threshold via 101-point interpolation;
/// nullopt when the category has no ground truth.
std::optional<double> average_precision(std::span<const BoxSet> preds,
                                        std::span<const BoxSet> gts, int category,
                                        double iou_threshold);

/// Paints boxes in order (later boxes overwrite earlier) over background 0.
/// Pixel (i, j) is inside iff x0 <= j + 0.5 < x1 and y0 <= i + 0.5 < y1.
LabelMap rasterize(const BoxSet& boxes, int64_t height, int64_t width);

struct EvalReport {
  std::string task;  // "segmentation" or "detection"
  std::vector<std::optional<double>> per_category_iou;
  std::optional<double> miou;
  std::array<std::optional<double>, 10> ap_per_threshold{};
  std::optional<double> map;
  std::optional<double> map50;
  int64_t samples = 0;
  uint64_t config_hash = 0;
  uint64_t seed = 0;
};

/// JSON document; undefined values are written as null.
std::string report_json(const EvalReport& report);

/// Renders an optional metric for CSV: fixed 6 decimals, or "nan".
std::string format_metric(const std::optional<double>& v);

}  // namespace saf
