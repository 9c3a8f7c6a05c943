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
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "saf/errors.hpp"
#include "saf/metrics.hpp"
#include "saf/rng.hpp"

namespace saf {
namespace {

LabelMap map2x2(std::initializer_list<uint8_t> v) {
  LabelMap m(2, 2);
  m.values = v;
  return m;
}

TEST(Miou, PerfectPrediction) {
  const LabelMap m = map2x2({0, 1, 2, 1});
  EXPECT_DOUBLE_EQ(*miou(m, m, 3).miou, 1.0);
}

TEST(Miou, BinaryTwoByTwo) {
  const IouResult r = miou(map2x2({1, 0, 0, 0}), map2x2({1, 1, 0, 0}), 2);
  EXPECT_DOUBLE_EQ(*r.per_category[1], 0.5);
  EXPECT_DOUBLE_EQ(*r.per_category[0], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(*r.miou, 7.0 / 12.0);
}

TEST(Miou, AllIgnoredIsUndefined) {
  const IouResult r = miou(map2x2({0, 1, 1, 0}), map2x2({255, 255, 255, 255}), 2);
  EXPECT_FALSE(r.miou.has_value());
  EXPECT_EQ(format_metric(r.miou), "nan");
}

TEST(Miou, AbsentCategoriesAreExcluded) {
  const IouResult r = miou(map2x2({0, 0, 1, 1}), map2x2({0, 0, 1, 1}), 4);
  EXPECT_FALSE(r.per_category[2].has_value());
  EXPECT_FALSE(r.per_category[3].has_value());
  EXPECT_DOUBLE_EQ(*r.miou, 1.0);
}

TEST(Miou, DatasetLevelNotPerImage) {
  // Image A: category 1 perfect on 1 px; image B: category 1 wrong on 3 px.
  const std::vector<LabelMap> preds{map2x2({1, 0, 0, 0}), map2x2({0, 0, 0, 0})};
  const std::vector<LabelMap> gts{map2x2({1, 0, 0, 0}), map2x2({1, 1, 1, 0})};
  const IouResult r = miou(preds, gts, 2);
  EXPECT_DOUBLE_EQ(*r.per_category[1], 1.0 / 4.0);
  EXPECT_DOUBLE_EQ(*r.per_category[0], 4.0 / 7.0);
}

TEST(Miou, SymmetricInBatchOrder) {
  Rng rng(3);
  std::vector<LabelMap> preds, gts;
  for (int k = 0; k < 6; ++k) {
    LabelMap p(5, 5), g(5, 5);
    for (auto& v : p.values) v = static_cast<uint8_t>(rng.uniform_int(0, 3));
    for (auto& v : g.values) v = rng.bernoulli(0.1) ? 255 : static_cast<uint8_t>(rng.uniform_int(0, 3));
    preds.push_back(p);
    gts.push_back(g);
  }
  const IouResult a = miou(preds, gts, 4);
  std::reverse(preds.begin(), preds.end());
  std::reverse(gts.begin(), gts.end());
  EXPECT_EQ(miou(preds, gts, 4).per_category, a.per_category);
  std::rotate(preds.begin(), preds.begin() + 2, preds.end());
  std::rotate(gts.begin(), gts.begin() + 2, gts.end());
  EXPECT_EQ(miou(preds, gts, 4).miou, a.miou);
}

TEST(Miou, RejectsMismatchedShapes) {
  IouAccumulator acc(2);
  EXPECT_THROW(acc.add(LabelMap(2, 2), LabelMap(2, 3)), Error);
}

Box pred(double x0, double y0, double x1, double y1, int c, double s) { return {x0, y0, x1, y1, c, s}; }
Box gt(double x0, double y0, double x1, double y1, int c) { return {x0, y0, x1, y1, c, {}}; }

TEST(Map, IdenticalPredictionsScoreOne) {
  const std::vector<BoxSet> gts{{gt(0, 0, 4, 4, 1), gt(5, 5, 9, 9, 2)}, {gt(1, 1, 3, 6, 1)}};
  std::vector<BoxSet> preds = gts;
  for (auto& set : preds) {
    for (auto& b : set) b.score = 1.0;
  }
  const ApResult r = map_50_95(preds, gts, 4);
  EXPECT_DOUBLE_EQ(*r.map, 1.0);
  EXPECT_DOUBLE_EQ(*r.map50, 1.0);
  EXPECT_EQ(r.evaluated_categories, (std::vector<int>{1, 2}));
}

TEST(Map, NoPredictionsScoreZero) {
  const std::vector<BoxSet> gts{{gt(0, 0, 4, 4, 1)}};
  const std::vector<BoxSet> preds{{}};
  EXPECT_DOUBLE_EQ(*map_50_95(preds, gts, 2).map, 0.0);
}

TEST(Map, NoGroundTruthIsUndefined) {
  const std::vector<BoxSet> gts{{}};
  const std::vector<BoxSet> preds{{pred(0, 0, 1, 1, 1, 0.5)}};
  EXPECT_FALSE(map_50_95(preds, gts, 2).map.has_value());
}

TEST(Map, DuplicatePredictionIsFalsePositiveButApStaysOne) {
  const std::vector<BoxSet> gts{{gt(0, 0, 10, 10, 1)}};
  const std::vector<BoxSet> preds{{pred(0, 0, 10, 10, 1, 0.9), pred(0, 0, 10, 10, 1, 0.8)}};
  for (double tau : kIouThresholds) EXPECT_DOUBLE_EQ(*average_precision(preds, gts, 1, tau), 1.0);
}

TEST(Map, LowerRankedTruePositiveHalvesPrecision) {
  const std::vector<BoxSet> gts{{gt(0, 0, 10, 10, 1)}};
  const std::vector<BoxSet> preds{{pred(20, 20, 30, 30, 1, 0.9), pred(0, 0, 10, 10, 1, 0.8)}};
  // Precision 1/2 at recall 1; all 101 recall points read 0.5.
  EXPECT_DOUBLE_EQ(*average_precision(preds, gts, 1, 0.5), 0.5);
}

TEST(Map, GreedyMatchPrefersHighestIou) {
  // The first prediction overlaps both gts; it must take the better one,
  // leaving the other for the second prediction.
  const std::vector<BoxSet> gts{{gt(0, 0, 10, 10, 1), gt(2, 0, 12, 10, 1)}};
  const std::vector<BoxSet> preds{{pred(2, 0, 12, 10, 1, 0.9), pred(0, 0, 10, 10, 1, 0.8)}};
  EXPECT_DOUBLE_EQ(*average_precision(preds, gts, 1, 0.75), 1.0);
}

// Independent AP: builds the precision/recall list with a straightforward
// loop and samples the precision envelope at 101 recall levels.
double oracle_ap(const std::vector<BoxSet>& preds, const std::vector<BoxSet>& gts, int c, double tau) {
  struct P {
    double s;
    size_t img, idx;
  };
  std::vector<P> order;
  int64_t n_gt = 0;
  for (size_t i = 0; i < gts.size(); ++i) {
    for (const auto& g : gts[i]) n_gt += g.category == c;
    for (size_t k = 0; k < preds[i].size(); ++k) {
      if (preds[i][k].category == c) order.push_back({*preds[i][k].score, i, k});
    }
  }
  std::stable_sort(order.begin(), order.end(), [](const P& a, const P& b) { return a.s > b.s; });
  std::vector<std::vector<bool>> used(gts.size());
  for (size_t i = 0; i < gts.size(); ++i) used[i].assign(gts[i].size(), false);
  std::vector<double> prec, rec;
  int64_t tp = 0, fp = 0;
  for (const auto& p : order) {
    double best = -1;
    int bi = -1;
    for (size_t g = 0; g < gts[p.img].size(); ++g) {
      if (gts[p.img][g].category != c || used[p.img][g]) continue;
      const double iou = box_iou(preds[p.img][p.idx], gts[p.img][g]);
      if (iou >= tau && iou > best) best = iou, bi = static_cast<int>(g);
    }
    if (bi >= 0) {
      used[p.img][static_cast<size_t>(bi)] = true;
      ++tp;
    } else {
      ++fp;
    }
    prec.push_back(double(tp) / double(tp + fp));
    rec.push_back(double(tp) / double(n_gt));
  }
  double sum = 0;
  for (int r = 0; r <= 100; ++r) {
    double best = 0;
    for (size_t k = 0; k < prec.size(); ++k) {
      if (rec[k] >= r / 100.0 - 1e-12) best = std::max(best, prec[k]);
    }
    sum += best;
  }
  return sum / 101.0;
}

std::vector<std::vector<BoxSet>> random_case(Rng& rng) {
  std::vector<BoxSet> gts(4), preds(4);
  for (size_t i = 0; i < 4; ++i) {
    const int ng = static_cast<int>(rng.uniform_int(0, 4));
    for (int k = 0; k < ng; ++k) {
      const double x = rng.uniform(0, 20), y = rng.uniform(0, 20);
      gts[i].push_back(gt(x, y, x + rng.uniform(3, 10), y + rng.uniform(3, 10), static_cast<int>(rng.uniform_int(1, 2))));
    }
    for (const auto& g : gts[i]) {
      if (rng.bernoulli(0.8)) {
        const double j = rng.uniform(-2, 2);
        preds[i].push_back(pred(g.x0 + j, g.y0, g.x1 + j, g.y1 + rng.uniform(-1, 1), g.category, rng.uniform()));
      }
    }
    const int nf = static_cast<int>(rng.uniform_int(0, 3));
    for (int k = 0; k < nf; ++k) {
      const double x = rng.uniform(0, 25), y = rng.uniform(0, 25);
      preds[i].push_back(pred(x, y, x + 4, y + 4, static_cast<int>(rng.uniform_int(1, 2)), rng.uniform()));
    }
  }
  return {preds, gts};
}

TEST(Map, MatchesIndependentOracle) {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = random_case(rng);
    for (int cat : {1, 2}) {
      const auto ap = average_precision(c[0], c[1], cat, 0.6);
      bool has_gt = false;
      for (const auto& set : c[1]) {
        for (const auto& g : set) has_gt = has_gt || g.category == cat;
      }
      ASSERT_EQ(ap.has_value(), has_gt);
      if (has_gt) ASSERT_NEAR(*ap, oracle_ap(c[0], c[1], cat, 0.6), 1e-12) << trial;
    }
  }
}

TEST(Map, InvariantUnderMonotoneScoreRescaling) {
  Rng rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    auto c = random_case(rng);
    const ApResult a = map_50_95(c[0], c[1], 3);
    for (auto& set : c[0]) {
      for (auto& b : set) b.score = std::pow(*b.score, 3.0) * 0.5 + 0.1;
    }
    const ApResult b = map_50_95(c[0], c[1], 3);
    ASSERT_EQ(a.map, b.map);
    ASSERT_EQ(a.per_threshold, b.per_threshold);
  }
}

TEST(Rasterize, FrozenExamples) {
  EXPECT_EQ(rasterize({}, 3, 3), LabelMap(3, 3, 0));
  EXPECT_EQ(rasterize({gt(0, 0, 4, 4, 3)}, 4, 4), LabelMap(4, 4, 3));
  const LabelMap m = rasterize({gt(1, 1, 3, 3, 1)}, 4, 4);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) EXPECT_EQ(m.at(i, j), (i >= 1 && i < 3 && j >= 1 && j < 3) ? 1 : 0);
  }
}

TEST(Rasterize, HalfOpenCentresAndPaintOrder) {
  // Centre 1.5 lies in [1.5, 2.5) but not in [0.2, 1.5).
  const LabelMap a = rasterize({gt(1.5, 0, 2.5, 1, 2)}, 1, 4);
  EXPECT_EQ(a.values, (std::vector<uint8_t>{0, 2, 0, 0}));
  const LabelMap b = rasterize({gt(0.2, 0, 1.5, 1, 2)}, 1, 4);
  EXPECT_EQ(b.values, (std::vector<uint8_t>{2, 0, 0, 0}));
  const LabelMap c = rasterize({gt(0, 0, 4, 1, 1), gt(1, 0, 3, 1, 2)}, 1, 4);
  EXPECT_EQ(c.values, (std::vector<uint8_t>{1, 2, 2, 1}));
}

TEST(Report, JsonUsesNullForUndefined) {
  EvalReport r;
  r.task = "segmentation";
  r.miou = 0.5;
  r.per_category_iou = {0.25, std::nullopt};
  const auto j = nlohmann::json::parse(report_json(r));
  EXPECT_DOUBLE_EQ(j["miou"].get<double>(), 0.5);
  EXPECT_TRUE(j["map"].is_null());
  EXPECT_TRUE(j["per_category_iou"][1].is_null());
  EXPECT_EQ(format_metric(0.1234567), "0.123457");
}

}  // namespace
}  // namespace saf
