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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "saf/tensor.hpp"

namespace saf {

/// Axis-aligned box in continuous pixel coordinates; pixel (i, j) covers
/// [j, j + 1) x [i, i + 1).
struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int category = 0;
  std::optional<double> score;  // present iff the box is a prediction

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() > 0 && height() > 0 ? width() * height() : 0.0; }

  friend bool operator==(const Box&, const Box&) = default;
};

using BoxSet = std::vector<Box>;

double box_iou(const Box& a, const Box& b);

/// One sample: image (3, H, W) in [0, 1], mask (H, W), boxes.
struct Scene {
  std::string id;
  Tensor image;
  LabelMap mask;
  BoxSet boxes;

  int64_t height() const { return mask.height; }
  int64_t width() const { return mask.width; }
  /// Image with a leading batch axis, (1, 3, H, W).
  Tensor batched_image() const;
};

struct GeneratorConfig {
  int height = 32;
  int width = 32;
  int categories = 4;  // including background category 0
  int min_shapes = 1;
  int max_shapes = 4;
  double min_extent = 0.2;  // shape extent as a fraction of the frame side
  double max_extent = 0.5;
  double texture_amplitude = 0.08;
  double pixel_noise = 0.02;
  double palette_saturation = 0.45;

  void validate() const;
};

enum class ShapeKind { kRectangle, kEllipse, kTriangle };

/// Geometry of one painted shape, exposed so tests can re-render scenes
/// independently of the generator's painter.
struct ShapeSpec {
  ShapeKind kind = ShapeKind::kRectangle;
  int category = 0;
  // Rectangle: [x0, x1) x [y0, y1). Ellipse: centre (cx, cy), radii (rx, ry).
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double cx = 0, cy = 0, rx = 0, ry = 0;
  std::array<double, 6> triangle{};  // (ax, ay, bx, by, cx, cy)

  /// Whether the point (x, y) lies inside the shape.
  bool contains(double x, double y) const;
};

struct GeneratedScene {
  Scene scene;
  std::vector<ShapeSpec> shapes;  // painting order; later shapes occlude
};

/// Deterministic in (cfg, seed, split, index).
GeneratedScene generate_scene(const GeneratorConfig& cfg, uint64_t seed,
                              const std::string& split, int index);

std::string scene_id(const std::string& split, int index);

struct DatasetManifest {
  std::filesystem::path root;
  std::string split;
  std::vector<std::string> ids;
  int height = 0;
  int width = 0;
  int categories = 0;
  uint64_t seed = 0;
  GeneratorConfig generator;
};

/// Generates `count` scenes into <root>/<split>/ and records the split in
/// <root>/manifest.json (other splits already listed there are kept).
DatasetManifest generate_dataset(const GeneratorConfig& cfg, uint64_t seed, int count,
                                 const std::filesystem::path& root,
                                 const std::string& split);

void write_manifest(const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& root, const std::string& split);

/// Writes <dir>/<id>.ppm (P6), <dir>/<id>.pgm (P5) and <dir>/<id>.boxes.
void encode_scene(const Scene& scene, const std::filesystem::path& dir);
Scene decode_scene(const std::filesystem::path& dir, const std::string& id);

std::vector<Scene> load_split(const DatasetManifest& manifest);

// Individual codecs, exposed for tests and the CLI.
void write_ppm(const Tensor& image, const std::filesystem::path& path);
Tensor read_ppm(const std::filesystem::path& path);
void write_pgm(const LabelMap& mask, const std::filesystem::path& path);
LabelMap read_pgm(const std::filesystem::path& path);
void write_boxes(const BoxSet& boxes, const std::filesystem::path& path);
BoxSet read_boxes(const std::filesystem::path& path);
std::string format_double(double v);

}  // namespace saf
