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
#include "saf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "json.hpp"
#include "saf/errors.hpp"

namespace saf {

IouAccumulator::IouAccumulator(int categories)
    : categories_(categories),
      intersection_(static_cast<size_t>(categories), 0),
      pred_count_(static_cast<size_t>(categories), 0),
      gt_count_(static_cast<size_t>(categories), 0) {
  if (categories < 1) throw ConfigError("IoU needs at least one category");
}

void IouAccumulator::add(const LabelMap& pred, const LabelMap& gt) {
  if (pred.numel() != gt.numel() || pred.height != gt.height || pred.width != gt.width) {
    throw DimensionError("miou: prediction and ground truth sizes differ");
  }
  for (size_t i = 0; i < gt.values.size(); ++i) {
    const int g = gt.values[i];
    if (g == LabelMap::kIgnore) continue;
    const int p = pred.values[i];
    if (g >= categories_) throw InvalidLabelError("miou: ground truth category out of range");
    ++gt_count_[static_cast<size_t>(g)];
    if (p < categories_) ++pred_count_[static_cast<size_t>(p)];
    if (p == g) ++intersection_[static_cast<size_t>(g)];
  }
}

std::vector<std::optional<double>> IouAccumulator::per_category() const {
  std::vector<std::optional<double>> out(static_cast<size_t>(categories_));
  for (size_t c = 0; c < out.size(); ++c) {
    const int64_t uni = pred_count_[c] + gt_count_[c] - intersection_[c];
    if (uni > 0) out[c] = static_cast<double>(intersection_[c]) / static_cast<double>(uni);
  }
  return out;
}

std::optional<double> IouAccumulator::miou() const {
  double total = 0;
  int counted = 0;
  for (const auto& v : per_category()) {
    if (v) {
      total += *v;
      ++counted;
    }
  }
  if (counted == 0) return std::nullopt;
  return total / counted;
}

IouResult miou(std::span<const LabelMap> preds, std::span<const LabelMap> gts, int categories) {
  if (preds.size() != gts.size()) throw DimensionError("miou: batch sizes differ");
  IouAccumulator acc(categories);
  for (size_t i = 0; i < preds.size(); ++i) acc.add(preds[i], gts[i]);
  return {acc.per_category(), acc.miou()};
}

IouResult miou(const LabelMap& pred, const LabelMap& gt, int categories) {
  return miou(std::span<const LabelMap>(&pred, 1), std::span<const LabelMap>(&gt, 1), categories);
}

std::optional<double> average_precision(std::span<const BoxSet> preds,
                                        std::span<const BoxSet> gts, int category,
                                        double iou_threshold) {
  if (preds.size() != gts.size()) throw DimensionError("map: image counts differ");
  struct Candidate {
    double score;
    size_t image;
    size_t index;
  };
  std::vector<Candidate> candidates;
  int64_t total_gt = 0;
  for (size_t img = 0; img < gts.size(); ++img) {
    for (const Box& g : gts[img]) total_gt += g.category == category;
    for (size_t k = 0; k < preds[img].size(); ++k) {
      const Box& p = preds[img][k];
      if (p.category != category) continue;
      if (!p.score) throw ConfigError("map: prediction box without a score");
      candidates.push_back({*p.score, img, k});
    }
  }
  if (total_gt == 0) return std::nullopt;
  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.image != b.image) return a.image < b.image;
    return a.index < b.index;
  });

  std::vector<std::vector<bool>> matched(gts.size());
  for (size_t img = 0; img < gts.size(); ++img) matched[img].assign(gts[img].size(), false);

  std::vector<double> precision, recall;
  precision.reserve(candidates.size());
  recall.reserve(candidates.size());
  int64_t tp = 0, fp = 0;
  for (const Candidate& c : candidates) {
    const Box& p = preds[c.image][c.index];
    double best = iou_threshold;
    std::optional<size_t> best_gt;
    const BoxSet& g = gts[c.image];
    for (size_t j = 0; j < g.size(); ++j) {
      if (g[j].category != category || matched[c.image][j]) continue;
      const double iou = box_iou(p, g[j]);
      if (iou >= best && (!best_gt || iou > best)) {
        best = iou;
        best_gt = j;
      }
    }
    if (best_gt) {
      matched[c.image][*best_gt] = true;
      ++tp;
    } else {
      ++fp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
  }
  // Precision envelope, then sample at 101 recall levels.
  for (size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double ap = 0;
  for (int r = 0; r <= 100; ++r) {
    const double level = r / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), level - 1e-12);
    if (it != recall.end()) ap += precision[static_cast<size_t>(it - recall.begin())];
  }
  return ap / 101.0;
}

ApResult map_50_95(std::span<const BoxSet> preds, std::span<const BoxSet> gts, int categories) {
  ApResult out;
  for (int c = 0; c < categories; ++c) {
    for (const BoxSet& g : gts) {
      if (std::any_of(g.begin(), g.end(), [c](const Box& b) { return b.category == c; })) {
        out.evaluated_categories.push_back(c);
        break;
      }
    }
  }
  if (out.evaluated_categories.empty()) {
    if (preds.size() != gts.size()) throw DimensionError("map: image counts differ");
    return out;
  }
  double total = 0;
  for (size_t t = 0; t < kIouThresholds.size(); ++t) {
    double sum = 0;
    for (int c : out.evaluated_categories) sum += *average_precision(preds, gts, c, kIouThresholds[t]);
    out.per_threshold[t] = sum / static_cast<double>(out.evaluated_categories.size());
    total += *out.per_threshold[t];
  }
  out.map = total / static_cast<double>(kIouThresholds.size());
  out.map50 = out.per_threshold[0];
  return out;
}

LabelMap rasterize(const BoxSet& boxes, int64_t height, int64_t width) {
  LabelMap out(height, width, 0);
  for (const Box& b : boxes) {
    if (b.category < 0 || b.category > 254) throw InvalidLabelError("rasterize: category out of range");
    // Half-open rule on pixel centres: x0 <= j + 0.5 < x1.
    const auto lo = [](double v) { return static_cast<int64_t>(std::ceil(v - 0.5)); };
    const int64_t j0 = std::max<int64_t>(0, lo(b.x0)), j1 = std::min(width, lo(b.x1));
    const int64_t i0 = std::max<int64_t>(0, lo(b.y0)), i1 = std::min(height, lo(b.y1));
    for (int64_t i = i0; i < i1; ++i) {
      for (int64_t j = j0; j < j1; ++j) out.at(i, j) = static_cast<uint8_t>(b.category);
    }
  }
  return out;
}

std::string format_metric(const std::optional<double>& v) {
  if (!v) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

std::string report_json(const EvalReport& r) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) -> json { return v ? json(*v) : json(nullptr); };
  json per_cat = json::array();
  for (const auto& v : r.per_category_iou) per_cat.push_back(opt(v));
  json per_thr = json::array();
  for (const auto& v : r.ap_per_threshold) per_thr.push_back(opt(v));
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(r.config_hash));
  json doc{{"task", r.task},         {"miou", opt(r.miou)},
           {"per_category_iou", per_cat}, {"map", opt(r.map)},
           {"map50", opt(r.map50)},  {"ap_per_threshold", per_thr},
           {"samples", r.samples},   {"config_hash", hash},
           {"seed", r.seed}};
  return doc.dump(2);
}

}  // namespace saf
