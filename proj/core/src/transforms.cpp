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
#include "saf/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "saf/errors.hpp"

namespace saf {

namespace {

constexpr std::array<std::pair<TransformKind, std::string_view>, 8> kKindNames{{
    {TransformKind::kIdentity, "identity"},
    {TransformKind::kBlockShuffle, "block_shuffle"},
    {TransformKind::kRotate, "rotate"},
    {TransformKind::kScaleResize, "scale_resize"},
    {TransformKind::kTranslate, "translate"},
    {TransformKind::kHFlip, "hflip"},
    {TransformKind::kPadCropResize, "pad_crop_resize"},
    {TransformKind::kAddNoise, "add_noise"},
}};

}  // namespace

std::string_view kind_name(TransformKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

TransformKind kind_from_name(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw ConfigError("unknown transform kind '" + std::string(name) + "'");
}

bool is_spatial_kind(TransformKind kind) {
  return kind != TransformKind::kIdentity && kind != TransformKind::kAddNoise;
}

bool has_exact_pixel_map(TransformKind kind) {
  switch (kind) {
    case TransformKind::kIdentity:
    case TransformKind::kAddNoise:
    case TransformKind::kBlockShuffle:
    case TransformKind::kHFlip:
    case TransformKind::kTranslate:
      return true;
    default:
      return false;
  }
}

TransformKind TransformInstance::kind() const {
  return std::visit(
      [](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, IdentityParams>) return TransformKind::kIdentity;
        if constexpr (std::is_same_v<P, BlockShuffleParams>) return TransformKind::kBlockShuffle;
        if constexpr (std::is_same_v<P, RotateParams>) return TransformKind::kRotate;
        if constexpr (std::is_same_v<P, ScaleParams>) return TransformKind::kScaleResize;
        if constexpr (std::is_same_v<P, TranslateParams>) return TransformKind::kTranslate;
        if constexpr (std::is_same_v<P, HFlipParams>) return TransformKind::kHFlip;
        if constexpr (std::is_same_v<P, PadCropResizeParams>) return TransformKind::kPadCropResize;
        if constexpr (std::is_same_v<P, NoiseParams>) return TransformKind::kAddNoise;
      },
      params_);
}

void TransformInstance::check_frame(int64_t height, int64_t width) const {
  if (height <= 0 || width <= 0) throw ParameterError("empty frame");
  switch (kind()) {
    case TransformKind::kBlockShuffle: {
      const auto& p = as<BlockShuffleParams>();
      if (p.grid < 1 || p.grid > std::min(height, width)) {
        throw ParameterError("block_shuffle grid " + std::to_string(p.grid) + " does not fit a " +
                             std::to_string(height) + "x" + std::to_string(width) + " frame");
      }
      const size_t n = static_cast<size_t>(p.grid * p.grid);
      if (p.permutation.size() != n) throw ParameterError("block_shuffle permutation has wrong length");
      std::vector<bool> seen(n, false);
      for (int s : p.permutation) {
        if (s < 0 || static_cast<size_t>(s) >= n || seen[static_cast<size_t>(s)]) {
          throw ParameterError("block_shuffle permutation is not a bijection");
        }
        seen[static_cast<size_t>(s)] = true;
      }
      break;
    }
    case TransformKind::kTranslate: {
      const auto& p = as<TranslateParams>();
      if (std::abs(p.dx) >= width || std::abs(p.dy) >= height) {
        throw ParameterError("translate shift exceeds the frame");
      }
      break;
    }
    case TransformKind::kScaleResize:
      if (!(as<ScaleParams>().factor > 0)) throw ParameterError("scale factor must be positive");
      break;
    case TransformKind::kPadCropResize: {
      const auto& p = as<PadCropResizeParams>();
      if (!(p.factor > 0)) throw ParameterError("pad_crop_resize factor must be positive");
      if (p.offset_x < 0 || p.offset_x > 1 || p.offset_y < 0 || p.offset_y > 1) {
        throw ParameterError("pad_crop_resize offsets must lie in [0, 1]");
      }
      break;
    }
    case TransformKind::kRotate:
      if (!std::isfinite(as<RotateParams>().degrees)) throw ParameterError("rotation angle not finite");
      break;
    default:
      break;
  }
}

std::string TransformInstance::describe() const {
  std::ostringstream os;
  os << kind_name(kind());
  std::visit(
      [&os](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, BlockShuffleParams>) {
          os << "(grid=" << p.grid << ", perm=[";
          for (size_t i = 0; i < p.permutation.size(); ++i) os << (i ? "," : "") << p.permutation[i];
          os << "])";
        } else if constexpr (std::is_same_v<P, RotateParams>) {
          os << "(" << p.degrees << " deg)";
        } else if constexpr (std::is_same_v<P, ScaleParams>) {
          os << "(x" << p.factor << ")";
        } else if constexpr (std::is_same_v<P, TranslateParams>) {
          os << "(" << p.dx << ", " << p.dy << ")";
        } else if constexpr (std::is_same_v<P, PadCropResizeParams>) {
          os << "(x" << p.factor << ", offset " << p.offset_x << ", " << p.offset_y << ")";
        } else if constexpr (std::is_same_v<P, NoiseParams>) {
          os << "(amplitude " << p.amplitude << ")";
        }
      },
      params_);
  return os.str();
}

// ---------------------------------------------------------------------------
// Sampling.

TransformInstance TransformDistribution::sample(Rng& rng) const {
  switch (kind) {
    case TransformKind::kIdentity:
      return TransformInstance(IdentityParams{});
    case TransformKind::kBlockShuffle: {
      BlockShuffleParams p;
      p.grid = static_cast<int>(rng.uniform_int(min_grid, max_grid));
      p.permutation.resize(static_cast<size_t>(p.grid * p.grid));
      for (size_t i = 0; i < p.permutation.size(); ++i) p.permutation[i] = static_cast<int>(i);
      for (size_t i = p.permutation.size(); i > 1; --i) {
        const auto j = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1));
        std::swap(p.permutation[i - 1], p.permutation[j]);
      }
      return TransformInstance(p);
    }
    case TransformKind::kRotate:
      return TransformInstance(RotateParams{rng.uniform(-max_degrees, max_degrees)});
    case TransformKind::kScaleResize:
      return TransformInstance(ScaleParams{rng.uniform(min_scale, max_scale)});
    case TransformKind::kTranslate: {
      const int dx = static_cast<int>(rng.uniform_int(-max_shift, max_shift));
      const int dy = static_cast<int>(rng.uniform_int(-max_shift, max_shift));
      return TransformInstance(TranslateParams{dx, dy});
    }
    case TransformKind::kHFlip:
      if (rng.bernoulli(probability)) return TransformInstance(HFlipParams{});
      return TransformInstance(IdentityParams{});
    case TransformKind::kPadCropResize: {
      PadCropResizeParams p;
      p.factor = rng.uniform(min_scale, max_scale);
      p.offset_x = rng.uniform();
      p.offset_y = rng.uniform();
      return TransformInstance(p);
    }
    case TransformKind::kAddNoise:
      return TransformInstance(NoiseParams{amplitude, rng.next()});
  }
  return TransformInstance(IdentityParams{});
}

std::vector<TransformInstance> sample(const TransformPipeline& pipeline, Rng& rng) {
  std::vector<TransformInstance> out;
  out.reserve(pipeline.stages.size());
  for (const auto& stage : pipeline.stages) out.push_back(stage.sample(rng));
  return out;
}

std::vector<TransformInstance> spatial_part(std::span<const TransformInstance> instances) {
  std::vector<TransformInstance> out;
  for (const auto& t : instances) {
    if (t.is_spatial()) out.push_back(t);
  }
  return out;
}

std::vector<std::string> preset_names() { return {"dem_like", "sia_like", "bsr_like", "ic_like"}; }

TransformPipeline preset_pipeline(std::string_view name, double magnitude) {
  if (!(magnitude >= 0.0 && magnitude <= 1.0)) {
    throw ConfigError("preset magnitude must lie in [0, 1]");
  }
  const double m = magnitude;
  const int max_grid = 1 + static_cast<int>(std::lround(2.0 * m));
  auto shuffle = [&] {
    TransformDistribution d;
    d.kind = TransformKind::kBlockShuffle;
    d.max_grid = max_grid;
    d.min_grid = std::min(2, max_grid);
    return d;
  };
  auto rotate = [](double max_degrees) {
    TransformDistribution d;
    d.kind = TransformKind::kRotate;
    d.max_degrees = max_degrees;
    return d;
  };
  auto resize = [](TransformKind kind, double lo, double hi) {
    TransformDistribution d;
    d.kind = kind;
    d.min_scale = lo;
    d.max_scale = hi;
    return d;
  };
  auto noise = [](double amplitude) {
    TransformDistribution d;
    d.kind = TransformKind::kAddNoise;
    d.amplitude = amplitude;
    return d;
  };

  TransformPipeline p;
  p.name = std::string(name);
  if (name == "bsr_like") {
    p.stages = {shuffle(), rotate(24.0 * m)};
  } else if (name == "ic_like") {
    p.stages = {noise(0.1 * m), shuffle(), resize(TransformKind::kScaleResize, 1.0 - 0.2 * m, 1.0 + 0.2 * m)};
  } else if (name == "sia_like") {
    TransformDistribution flip;
    flip.kind = TransformKind::kHFlip;
    flip.probability = 0.5 * m;
    p.stages = {noise(0.05 * m), shuffle(), flip,
                resize(TransformKind::kScaleResize, 1.0 - 0.2 * m, 1.0 + 0.2 * m)};
  } else if (name == "dem_like") {
    p.stages = {resize(TransformKind::kPadCropResize, 1.0 - 0.2 * m / 3.0, 1.0), rotate(24.0 * m / 3.0)};
  } else {
    throw ConfigError("unknown preset pipeline '" + std::string(name) + "'");
  }
  return p;
}

std::string serialize_pipeline(const TransformPipeline& pipeline) {
  using nlohmann::json;
  json stages = json::array();
  for (const auto& d : pipeline.stages) {
    json s{{"kind", std::string(kind_name(d.kind))}};
    switch (d.kind) {
      case TransformKind::kBlockShuffle:
        s["min_grid"] = d.min_grid;
        s["max_grid"] = d.max_grid;
        break;
      case TransformKind::kRotate:
        s["max_degrees"] = d.max_degrees;
        break;
      case TransformKind::kScaleResize:
      case TransformKind::kPadCropResize:
        s["min_scale"] = d.min_scale;
        s["max_scale"] = d.max_scale;
        break;
      case TransformKind::kTranslate:
        s["max_shift"] = d.max_shift;
        break;
      case TransformKind::kHFlip:
        s["probability"] = d.probability;
        break;
      case TransformKind::kAddNoise:
        s["amplitude"] = d.amplitude;
        break;
      case TransformKind::kIdentity:
        break;
    }
    stages.push_back(s);
  }
  return json{{"name", pipeline.name}, {"stages", stages}}.dump();
}

TransformPipeline parse_pipeline(std::string_view json_text) {
  using nlohmann::json;
  TransformPipeline p;
  try {
    const json doc = json::parse(json_text);
    p.name = doc.value("name", std::string("custom"));
    for (const json& s : doc.at("stages")) {
      TransformDistribution d;
      d.kind = kind_from_name(s.at("kind").get<std::string>());
      d.min_grid = s.value("min_grid", 1);
      d.max_grid = s.value("max_grid", d.min_grid);
      d.max_degrees = s.value("max_degrees", 0.0);
      d.min_scale = s.value("min_scale", 1.0);
      d.max_scale = s.value("max_scale", d.min_scale);
      d.max_shift = s.value("max_shift", 0);
      d.probability = s.value("probability", 1.0);
      d.amplitude = s.value("amplitude", 0.0);
      if (d.min_grid < 1 || d.max_grid < d.min_grid) throw ConfigError("pipeline: bad grid range");
      if (d.max_scale < d.min_scale || d.min_scale <= 0) throw ConfigError("pipeline: bad scale range");
      if (d.max_shift < 0 || d.max_degrees < 0 || d.amplitude < 0) {
        throw ConfigError("pipeline: ranges must be non-negative");
      }
      p.stages.push_back(d);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("pipeline: ") + e.what());
  }
  return p;
}

// ---------------------------------------------------------------------------
// Geometry.

namespace {

struct BlockLattice {
  int grid;
  int64_t bh, bw;

  bool inside(int64_t i, int64_t j) const { return i < grid * bh && j < grid * bw; }
  int64_t row0(int block) const { return (block / grid) * bh; }
  int64_t col0(int block) const { return (block % grid) * bw; }
};

BlockLattice lattice_of(const BlockShuffleParams& p, int64_t height, int64_t width) {
  return BlockLattice{p.grid, height / p.grid, width / p.grid};
}

std::array<double, 2> rotate_about(double x, double y, double cx, double cy, double radians) {
  const double c = std::cos(radians), s = std::sin(radians);
  const double dx = x - cx, dy = y - cy;
  // y grows downward, so a counter-clockwise turn on screen is
  // (dx, dy) -> (c dx + s dy, -s dx + c dy).
  return {cx + c * dx + s * dy, cy - s * dx + c * dy};
}

double pad_offset(double slack_fraction, double factor, int64_t side) {
  return slack_fraction * (1.0 - factor) * static_cast<double>(side);
}

}  // namespace

std::array<double, 2> source_point(const TransformInstance& t, double x, double y, int64_t height,
                                   int64_t width) {
  const double cx = width / 2.0, cy = height / 2.0;
  switch (t.kind()) {
    case TransformKind::kRotate:
      return rotate_about(x, y, cx, cy, -t.as<RotateParams>().degrees * std::numbers::pi / 180.0);
    case TransformKind::kScaleResize: {
      const double f = t.as<ScaleParams>().factor;
      return {cx + (x - cx) / f, cy + (y - cy) / f};
    }
    case TransformKind::kPadCropResize: {
      const auto& p = t.as<PadCropResizeParams>();
      return {(x - pad_offset(p.offset_x, p.factor, width)) / p.factor,
              (y - pad_offset(p.offset_y, p.factor, height)) / p.factor};
    }
    case TransformKind::kTranslate: {
      const auto& p = t.as<TranslateParams>();
      return {x - p.dx, y - p.dy};
    }
    case TransformKind::kHFlip:
      return {static_cast<double>(width) - x, y};
    case TransformKind::kBlockShuffle: {
      const auto& p = t.as<BlockShuffleParams>();
      const BlockLattice lat = lattice_of(p, height, width);
      const auto i = static_cast<int64_t>(std::floor(y)), j = static_cast<int64_t>(std::floor(x));
      if (i < 0 || j < 0 || !lat.inside(i, j)) return {x, y};
      const int dst = static_cast<int>((i / lat.bh) * lat.grid + j / lat.bw);
      const int src = p.permutation[static_cast<size_t>(dst)];
      return {x - lat.col0(dst) + lat.col0(src), y - lat.row0(dst) + lat.row0(src)};
    }
    default:
      return {x, y};
  }
}

std::array<double, 2> destination_point(const TransformInstance& t, double x, double y,
                                        int64_t height, int64_t width) {
  const double cx = width / 2.0, cy = height / 2.0;
  switch (t.kind()) {
    case TransformKind::kRotate:
      return rotate_about(x, y, cx, cy, t.as<RotateParams>().degrees * std::numbers::pi / 180.0);
    case TransformKind::kScaleResize: {
      const double f = t.as<ScaleParams>().factor;
      return {cx + (x - cx) * f, cy + (y - cy) * f};
    }
    case TransformKind::kPadCropResize: {
      const auto& p = t.as<PadCropResizeParams>();
      return {pad_offset(p.offset_x, p.factor, width) + x * p.factor,
              pad_offset(p.offset_y, p.factor, height) + y * p.factor};
    }
    case TransformKind::kTranslate: {
      const auto& p = t.as<TranslateParams>();
      return {x + p.dx, y + p.dy};
    }
    case TransformKind::kHFlip:
      return {static_cast<double>(width) - x, y};
    case TransformKind::kBlockShuffle: {
      const auto& p = t.as<BlockShuffleParams>();
      const BlockLattice lat = lattice_of(p, height, width);
      const auto i = static_cast<int64_t>(std::floor(y)), j = static_cast<int64_t>(std::floor(x));
      if (i < 0 || j < 0 || !lat.inside(i, j)) return {x, y};
      const int src = static_cast<int>((i / lat.bh) * lat.grid + j / lat.bw);
      const auto it = std::find(p.permutation.begin(), p.permutation.end(), src);
      const int dst = static_cast<int>(it - p.permutation.begin());
      return {x - lat.col0(src) + lat.col0(dst), y - lat.row0(src) + lat.row0(dst)};
    }
    default:
      return {x, y};
  }
}

std::vector<int32_t> exact_index_map(const TransformInstance& t, int64_t height, int64_t width) {
  if (!has_exact_pixel_map(t.kind())) {
    throw ParameterError(std::string(kind_name(t.kind())) + " has no exact pixel map");
  }
  t.check_frame(height, width);
  std::vector<int32_t> index(static_cast<size_t>(height * width));
  for (int64_t i = 0; i < height; ++i) {
    for (int64_t j = 0; j < width; ++j) {
      int64_t si = i, sj = j;
      switch (t.kind()) {
        case TransformKind::kHFlip:
          sj = width - 1 - j;
          break;
        case TransformKind::kTranslate: {
          const auto& p = t.as<TranslateParams>();
          si = i - p.dy;
          sj = j - p.dx;
          break;
        }
        case TransformKind::kBlockShuffle: {
          const auto& p = t.as<BlockShuffleParams>();
          const BlockLattice lat = lattice_of(p, height, width);
          if (lat.inside(i, j)) {
            const int dst = static_cast<int>((i / lat.bh) * lat.grid + j / lat.bw);
            const int src = p.permutation[static_cast<size_t>(dst)];
            si = lat.row0(src) + i % lat.bh;
            sj = lat.col0(src) + j % lat.bw;
          }
          break;
        }
        default:
          break;
      }
      const bool valid = si >= 0 && si < height && sj >= 0 && sj < width;
      index[static_cast<size_t>(i * width + j)] = valid ? static_cast<int32_t>(si * width + sj) : -1;
    }
  }
  return index;
}

// ---------------------------------------------------------------------------
// Image action.

Var apply_image(const TransformInstance& t, Var x) {
  const Tensor& v = x.value();
  if (v.rank() != 4) throw DimensionError("apply_image: expected (B, C, H, W), got " + shape_str(v.shape()));
  const int64_t height = v.dim(2), width = v.dim(3);
  t.check_frame(height, width);
  switch (t.kind()) {
    case TransformKind::kIdentity:
      return x;
    case TransformKind::kAddNoise: {
      const auto& p = t.as<NoiseParams>();
      Rng rng(p.seed);
      Tensor noise(v.shape());
      for (int64_t i = 0; i < noise.numel(); ++i) {
        noise[i] = static_cast<float>(rng.uniform(-p.amplitude, p.amplitude));
      }
      return add(x, noise);
    }
    case TransformKind::kHFlip:
    case TransformKind::kBlockShuffle: {
      const auto index = exact_index_map(t, height, width);
      return gather_pixels(x, index);
    }
    case TransformKind::kTranslate: {
      const auto index = exact_index_map(t, height, width);
      return remap_pixels(x, index, 0.0f);
    }
    default: {
      Tensor grid({1, height, width, 2});
      for (int64_t i = 0; i < height; ++i) {
        for (int64_t j = 0; j < width; ++j) {
          const auto src = source_point(t, j + 0.5, i + 0.5, height, width);
          const int64_t base = (i * width + j) * 2;
          grid[base] = static_cast<float>(2.0 * src[0] / static_cast<double>(width) - 1.0);
          grid[base + 1] = static_cast<float>(2.0 * src[1] / static_cast<double>(height) - 1.0);
        }
      }
      return bilinear_sample(x, grid, 0.0f);
    }
  }
}

Var apply_image_chain(std::span<const TransformInstance> instances, Var x) {
  for (const auto& t : instances) x = apply_image(t, x);
  return x;
}

Tensor apply_image(const TransformInstance& instance, const Tensor& x) {
  Tape tape;
  return apply_image(instance, tape.constant(x)).value();
}

Tensor apply_image_chain(std::span<const TransformInstance> instances, const Tensor& x) {
  Tape tape;
  return apply_image_chain(instances, tape.constant(x)).value();
}

// ---------------------------------------------------------------------------
// Mask action.

LabelMap apply_mask(const TransformInstance& t, const LabelMap& mask) {
  if (!t.is_spatial()) return mask;
  const int64_t height = mask.height, width = mask.width, hw = height * width;
  t.check_frame(height, width);
  LabelMap out(mask.batch, height, width, LabelMap::kIgnore);
  std::vector<int32_t> index;
  if (has_exact_pixel_map(t.kind())) {
    index = exact_index_map(t, height, width);
  } else {
    index.resize(static_cast<size_t>(hw));
    for (int64_t i = 0; i < height; ++i) {
      for (int64_t j = 0; j < width; ++j) {
        const auto src = source_point(t, j + 0.5, i + 0.5, height, width);
        const double sx = std::floor(src[0]), sy = std::floor(src[1]);
        const bool valid = sx >= 0 && sx < static_cast<double>(width) && sy >= 0 &&
                           sy < static_cast<double>(height);
        index[static_cast<size_t>(i * width + j)] =
            valid ? static_cast<int32_t>(static_cast<int64_t>(sy) * width + static_cast<int64_t>(sx)) : -1;
      }
    }
  }
  for (int64_t b = 0; b < mask.batch; ++b) {
    for (int64_t p = 0; p < hw; ++p) {
      const int32_t s = index[static_cast<size_t>(p)];
      if (s >= 0) out.values[static_cast<size_t>(b * hw + p)] = mask.values[static_cast<size_t>(b * hw + s)];
    }
  }
  return out;
}

LabelMap apply_mask_chain(std::span<const TransformInstance> instances, const LabelMap& mask) {
  LabelMap out = mask;
  for (const auto& t : instances) out = apply_mask(t, out);
  return out;
}

// ---------------------------------------------------------------------------
// Box action.

namespace {

bool keep_box(const Box& b, double min_area) { return b.area() > 0 && b.area() >= min_area; }

Box clip(Box b, int64_t height, int64_t width) {
  b.x0 = std::clamp(b.x0, 0.0, static_cast<double>(width));
  b.x1 = std::clamp(b.x1, 0.0, static_cast<double>(width));
  b.y0 = std::clamp(b.y0, 0.0, static_cast<double>(height));
  b.y1 = std::clamp(b.y1, 0.0, static_cast<double>(height));
  return b;
}

// Sutherland-Hodgman clip of a convex polygon to [0, width] x [0, height].
std::vector<std::array<double, 2>> clip_polygon(std::vector<std::array<double, 2>> poly,
                                                double width, double height) {
  auto clip_edge = [&](int axis, double bound, bool keep_below) {
    std::vector<std::array<double, 2>> out;
    const size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
      const auto& a = poly[i];
      const auto& b = poly[(i + 1) % n];
      const bool ina = keep_below ? a[axis] <= bound : a[axis] >= bound;
      const bool inb = keep_below ? b[axis] <= bound : b[axis] >= bound;
      if (ina) out.push_back(a);
      if (ina != inb) {
        const double f = (bound - a[axis]) / (b[axis] - a[axis]);
        std::array<double, 2> p{a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])};
        p[static_cast<size_t>(axis)] = bound;
        out.push_back(p);
      }
    }
    poly = std::move(out);
  };
  clip_edge(0, 0.0, false);
  clip_edge(0, width, true);
  clip_edge(1, 0.0, false);
  clip_edge(1, height, true);
  return poly;
}

void push_piece(BoxSet& out, const Box& box, double rx0, double ry0, double rx1, double ry1,
                double dx, double dy, double min_area) {
  Box piece = box;
  piece.x0 = std::max(box.x0, rx0) + dx;
  piece.y0 = std::max(box.y0, ry0) + dy;
  piece.x1 = std::min(box.x1, rx1) + dx;
  piece.y1 = std::min(box.y1, ry1) + dy;
  if (keep_box(piece, min_area)) out.push_back(piece);
}

}  // namespace

BoxSet apply_boxes(const TransformInstance& t, const BoxSet& boxes, int64_t height, int64_t width,
                   double min_area) {
  if (!t.is_spatial()) return boxes;
  t.check_frame(height, width);
  BoxSet out;
  const double w = static_cast<double>(width), h = static_cast<double>(height);
  for (const Box& box : boxes) {
    switch (t.kind()) {
      case TransformKind::kBlockShuffle: {
        const auto& p = t.as<BlockShuffleParams>();
        const BlockLattice lat = lattice_of(p, height, width);
        const double bw = static_cast<double>(lat.bw), bh = static_cast<double>(lat.bh);
        for (int dst = 0; dst < p.grid * p.grid; ++dst) {
          const int src = p.permutation[static_cast<size_t>(dst)];
          const double sx = static_cast<double>(lat.col0(src)), sy = static_cast<double>(lat.row0(src));
          push_piece(out, box, sx, sy, sx + bw, sy + bh, static_cast<double>(lat.col0(dst)) - sx,
                     static_cast<double>(lat.row0(dst)) - sy, min_area);
        }
        // Remainder strips outside the lattice stay in place.
        const double gx = p.grid * bw, gy = p.grid * bh;
        push_piece(out, box, gx, 0, w, h, 0, 0, min_area);
        push_piece(out, box, 0, gy, gx, h, 0, 0, min_area);
        break;
      }
      case TransformKind::kHFlip: {
        Box b = box;
        b.x0 = w - box.x1;
        b.x1 = w - box.x0;
        if (keep_box(b, min_area)) out.push_back(b);
        break;
      }
      default: {
        // Affine kinds: hull of the remapped corner polygon clipped to the
        // frame, so corners leaving the frame do not widen the box.
        std::vector<std::array<double, 2>> poly;
        for (const auto& [cx, cy] : {std::array{box.x0, box.y0}, std::array{box.x1, box.y0},
                                     std::array{box.x1, box.y1}, std::array{box.x0, box.y1}}) {
          poly.push_back(destination_point(t, cx, cy, height, width));
        }
        poly = clip_polygon(poly, static_cast<double>(width), static_cast<double>(height));
        double x0 = INFINITY, y0 = INFINITY, x1 = -INFINITY, y1 = -INFINITY;
        for (const auto& p : poly) {
          x0 = std::min(x0, p[0]);
          y0 = std::min(y0, p[1]);
          x1 = std::max(x1, p[0]);
          y1 = std::max(y1, p[1]);
        }
        if (poly.empty()) break;
        Box b = box;
        b.x0 = x0;
        b.y0 = y0;
        b.x1 = x1;
        b.y1 = y1;
        b = clip(b, height, width);
        if (keep_box(b, min_area)) out.push_back(b);
        break;
      }
    }
  }
  return out;
}

BoxSet apply_boxes_chain(std::span<const TransformInstance> instances, const BoxSet& boxes,
                         int64_t height, int64_t width, double min_area) {
  BoxSet out = boxes;
  for (const auto& t : instances) out = apply_boxes(t, out, height, width, min_area);
  return out;
}

}  // namespace saf
