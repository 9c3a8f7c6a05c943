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
#include "saf/scenes.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "saf/errors.hpp"
#include "saf/rng.hpp"

namespace saf {

namespace fs = std::filesystem;
using nlohmann::json;

double box_iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double ih = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

Tensor Scene::batched_image() const {
  return image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)});
}

void GeneratorConfig::validate() const {
  if (height < 32 || width < 32) {
    throw ConfigError("generator: image size must be at least 32x32, got " +
                      std::to_string(height) + "x" + std::to_string(width));
  }
  if (categories < 2 || categories > 254) {
    throw ConfigError("generator: categories must lie in [2, 254]");
  }
  if (min_shapes < 0 || max_shapes < min_shapes) {
    throw ConfigError("generator: shapes_per_scene must satisfy 0 <= min <= max");
  }
  if (!(min_extent > 0 && max_extent >= min_extent && max_extent <= 1)) {
    throw ConfigError("generator: shape extents must satisfy 0 < min <= max <= 1");
  }
}

bool ShapeSpec::contains(double x, double y) const {
  switch (kind) {
    case ShapeKind::kRectangle:
      return x >= x0 && x < x1 && y >= y0 && y < y1;
    case ShapeKind::kEllipse: {
      const double dx = (x - cx) / rx;
      const double dy = (y - cy) / ry;
      return dx * dx + dy * dy <= 1.0;
    }
    case ShapeKind::kTriangle: {
      const auto& t = triangle;
      auto edge = [&](int a, int b) {
        return (t[2 * b] - t[2 * a]) * (y - t[2 * a + 1]) -
               (t[2 * b + 1] - t[2 * a + 1]) * (x - t[2 * a]);
      };
      const double e0 = edge(0, 1), e1 = edge(1, 2), e2 = edge(2, 0);
      return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
    }
  }
  return false;
}

std::string scene_id(const std::string& split, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05d", index);
  return split + "_" + buf;
}

namespace {

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  const double hh = std::fmod(h, 1.0) * 6.0;
  const int sector = static_cast<int>(std::floor(hh)) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

// Smooth low-frequency texture: random values on a coarse lattice,
// bilinearly interpolated to full resolution.
std::vector<double> value_noise(Rng& rng, int height, int width, int cell, double amplitude) {
  const int gh = height / cell + 2, gw = width / cell + 2;
  std::vector<double> lattice(static_cast<size_t>(gh * gw));
  for (double& v : lattice) v = rng.uniform(-amplitude, amplitude);
  std::vector<double> out(static_cast<size_t>(height * width));
  for (int i = 0; i < height; ++i) {
    const double fy = (i + 0.5) / cell;
    const int y0 = static_cast<int>(fy);
    const double wy = fy - y0;
    for (int j = 0; j < width; ++j) {
      const double fx = (j + 0.5) / cell;
      const int x0 = static_cast<int>(fx);
      const double wx = fx - x0;
      auto at = [&](int y, int x) { return lattice[static_cast<size_t>(y * gw + x)]; };
      out[static_cast<size_t>(i * width + j)] =
          (1 - wy) * ((1 - wx) * at(y0, x0) + wx * at(y0, x0 + 1)) +
          wy * ((1 - wx) * at(y0 + 1, x0) + wx * at(y0 + 1, x0 + 1));
    }
  }
  return out;
}

ShapeSpec sample_shape(Rng& rng, const GeneratorConfig& cfg) {
  ShapeSpec s;
  s.kind = static_cast<ShapeKind>(rng.uniform_int(0, 2));
  s.category = static_cast<int>(rng.uniform_int(1, cfg.categories - 1));
  const double ew = rng.uniform(cfg.min_extent, cfg.max_extent) * cfg.width;
  const double eh = rng.uniform(cfg.min_extent, cfg.max_extent) * cfg.height;
  const double cx = rng.uniform(ew / 2, cfg.width - ew / 2);
  const double cy = rng.uniform(eh / 2, cfg.height - eh / 2);
  s.x0 = cx - ew / 2;
  s.x1 = cx + ew / 2;
  s.y0 = cy - eh / 2;
  s.y1 = cy + eh / 2;
  s.cx = cx;
  s.cy = cy;
  s.rx = ew / 2;
  s.ry = eh / 2;
  const double apex = rng.uniform(s.x0, s.x1);
  if (rng.bernoulli(0.5)) {
    s.triangle = {apex, s.y0, s.x0, s.y1, s.x1, s.y1};
  } else {
    s.triangle = {apex, s.y1, s.x0, s.y0, s.x1, s.y0};
  }
  return s;
}

}  // namespace

GeneratedScene generate_scene(const GeneratorConfig& cfg, uint64_t seed, const std::string& split,
                              int index) {
  cfg.validate();
  Rng rng(derive_seed({seed, fnv1a64(split), static_cast<uint64_t>(index)}));
  const int h = cfg.height, w = cfg.width;
  const size_t hw = static_cast<size_t>(h * w);

  std::vector<std::array<double, 3>> palette(static_cast<size_t>(cfg.categories));
  for (int c = 1; c < cfg.categories; ++c) {
    palette[static_cast<size_t>(c)] =
        hsv_to_rgb(static_cast<double>(c - 1) / (cfg.categories - 1), cfg.palette_saturation, 0.75);
  }

  GeneratedScene out;
  Scene& scene = out.scene;
  scene.id = scene_id(split, index);
  scene.image = Tensor({3, h, w});
  scene.mask = LabelMap(h, w, 0);

  // Background: neutral base with value-noise texture per channel.
  const double base = rng.uniform(0.4, 0.6);
  for (int c = 0; c < 3; ++c) {
    const auto tex = value_noise(rng, h, w, 8, cfg.texture_amplitude);
    for (size_t p = 0; p < hw; ++p) {
      scene.image[static_cast<int64_t>(c * hw + p)] = static_cast<float>(base + tex[p]);
    }
  }

  const int count = static_cast<int>(rng.uniform_int(cfg.min_shapes, cfg.max_shapes));
  std::vector<int> owner(hw, -1);
  for (int k = 0; k < count; ++k) {
    ShapeSpec shape = sample_shape(rng, cfg);
    std::array<double, 3> color = palette[static_cast<size_t>(shape.category)];
    for (double& v : color) v += rng.uniform(-0.05, 0.05);
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        if (!shape.contains(j + 0.5, i + 0.5)) continue;
        const size_t p = static_cast<size_t>(i * w + j);
        owner[p] = k;
        for (int c = 0; c < 3; ++c) {
          scene.image[static_cast<int64_t>(c * hw + p)] = static_cast<float>(color[static_cast<size_t>(c)]);
        }
      }
    }
    out.shapes.push_back(shape);
  }

  for (size_t p = 0; p < hw; ++p) {
    if (owner[p] >= 0) {
      scene.mask.values[p] = static_cast<uint8_t>(out.shapes[static_cast<size_t>(owner[p])].category);
    }
  }
  for (int c = 0; c < 3; ++c) {
    for (size_t p = 0; p < hw; ++p) {
      float& v = scene.image[static_cast<int64_t>(c * hw + p)];
      v = std::clamp(static_cast<float>(v + rng.uniform(-cfg.pixel_noise, cfg.pixel_noise)), 0.0f, 1.0f);
    }
  }

  // Boxes are the tight extent of each shape's visible pixels; fully
  // occluded shapes produce none.
  for (int k = 0; k < count; ++k) {
    int x0 = w, y0 = h, x1 = -1, y1 = -1;
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        if (owner[static_cast<size_t>(i * w + j)] != k) continue;
        x0 = std::min(x0, j);
        x1 = std::max(x1, j);
        y0 = std::min(y0, i);
        y1 = std::max(y1, i);
      }
    }
    if (x1 < 0) continue;
    scene.boxes.push_back(Box{static_cast<double>(x0), static_cast<double>(y0),
                              static_cast<double>(x1 + 1), static_cast<double>(y1 + 1),
                              out.shapes[static_cast<size_t>(k)].category, std::nullopt});
  }
  return out;
}

namespace {

json generator_to_json(const GeneratorConfig& g) {
  return json{{"height", g.height},
              {"width", g.width},
              {"categories", g.categories},
              {"shapes_per_scene", {g.min_shapes, g.max_shapes}},
              {"extent", {g.min_extent, g.max_extent}},
              {"texture_amplitude", g.texture_amplitude},
              {"pixel_noise", g.pixel_noise},
              {"palette_saturation", g.palette_saturation}};
}

GeneratorConfig generator_from_json(const json& j) {
  GeneratorConfig g;
  g.height = j.at("height").get<int>();
  g.width = j.at("width").get<int>();
  g.categories = j.at("categories").get<int>();
  g.min_shapes = j.at("shapes_per_scene").at(0).get<int>();
  g.max_shapes = j.at("shapes_per_scene").at(1).get<int>();
  g.min_extent = j.at("extent").at(0).get<double>();
  g.max_extent = j.at("extent").at(1).get<double>();
  g.texture_amplitude = j.at("texture_amplitude").get<double>();
  g.pixel_noise = j.at("pixel_noise").get<double>();
  g.palette_saturation = j.at("palette_saturation").get<double>();
  return g;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CodecError(path.string(), "cannot open file");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CodecError(path.string(), "cannot open file for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CodecError(path.string(), "write failed");
}

struct Netpbm {
  int width = 0, height = 0;
  std::string_view pixels;
};

// Parses a binary PPM/PGM header ("P6"/"P5", width, height, maxval 255).
Netpbm parse_netpbm(const std::string& bytes, const char* magic, int channels,
                    const fs::path& path) {
  size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> int {
    skip_space();
    int v = 0;
    auto [ptr, ec] = std::from_chars(bytes.data() + pos, bytes.data() + bytes.size(), v);
    if (ec != std::errc()) throw CodecError(path.string(), "malformed header");
    pos = static_cast<size_t>(ptr - bytes.data());
    return v;
  };
  if (bytes.size() < 2 || bytes.compare(0, 2, magic) != 0) {
    throw CodecError(path.string(), std::string("expected magic ") + magic);
  }
  pos = 2;
  Netpbm out;
  out.width = read_int();
  out.height = read_int();
  const int maxval = read_int();
  if (out.width <= 0 || out.height <= 0) throw CodecError(path.string(), "non-positive dimensions");
  if (maxval != 255) throw CodecError(path.string(), "only maxval 255 is supported");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw CodecError(path.string(), "malformed header");
  }
  ++pos;
  const size_t expected = static_cast<size_t>(out.width) * static_cast<size_t>(out.height) *
                          static_cast<size_t>(channels);
  if (bytes.size() - pos != expected) {
    throw CodecError(path.string(), "pixel payload has " + std::to_string(bytes.size() - pos) +
                                        " bytes, header implies " + std::to_string(expected));
  }
  out.pixels = std::string_view(bytes).substr(pos);
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_ppm(const Tensor& image, const fs::path& path) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw DimensionError("write_ppm: image must be (3, H, W), got " + shape_str(image.shape()));
  }
  const int64_t h = image.dim(1), w = image.dim(2), hw = h * w;
  std::string bytes = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  bytes.reserve(bytes.size() + static_cast<size_t>(3 * hw));
  for (int64_t p = 0; p < hw; ++p) {
    for (int64_t c = 0; c < 3; ++c) {
      const float v = std::clamp(image[c * hw + p], 0.0f, 1.0f);
      bytes.push_back(static_cast<char>(static_cast<uint8_t>(std::lround(v * 255.0f))));
    }
  }
  write_file(path, bytes);
}

Tensor read_ppm(const fs::path& path) {
  const std::string bytes = read_file(path);
  const Netpbm pbm = parse_netpbm(bytes, "P6", 3, path);
  const int64_t hw = static_cast<int64_t>(pbm.width) * pbm.height;
  Tensor image({3, pbm.height, pbm.width});
  for (int64_t p = 0; p < hw; ++p) {
    for (int64_t c = 0; c < 3; ++c) {
      image[c * hw + p] = static_cast<float>(static_cast<uint8_t>(pbm.pixels[static_cast<size_t>(3 * p + c)])) / 255.0f;
    }
  }
  return image;
}

void write_pgm(const LabelMap& mask, const fs::path& path) {
  if (mask.batch != 1) throw DimensionError("write_pgm: expected a single label map");
  std::string bytes = "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) + "\n255\n";
  bytes.append(mask.values.begin(), mask.values.end());
  write_file(path, bytes);
}

LabelMap read_pgm(const fs::path& path) {
  const std::string bytes = read_file(path);
  const Netpbm pbm = parse_netpbm(bytes, "P5", 1, path);
  LabelMap mask(pbm.height, pbm.width, 0);
  std::copy(pbm.pixels.begin(), pbm.pixels.end(), mask.values.begin());
  return mask;
}

void write_boxes(const BoxSet& boxes, const fs::path& path) {
  std::string text;
  for (const Box& b : boxes) {
    text += format_double(b.x0) + " " + format_double(b.y0) + " " + format_double(b.x1) + " " +
            format_double(b.y1) + " " + std::to_string(b.category);
    if (b.score) text += " " + format_double(*b.score);
    text += "\n";
  }
  write_file(path, text);
}

BoxSet read_boxes(const fs::path& path) {
  const std::string text = read_file(path);
  BoxSet boxes;
  std::istringstream lines(text);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream ls(line);
    for (std::string f; ls >> f;) fields.push_back(f);
    if (fields.size() != 5 && fields.size() != 6) {
      throw CodecError(path.string(), "line " + std::to_string(line_no) + ": expected 5 or 6 fields");
    }
    auto num = [&](const std::string& f) {
      double v = 0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw CodecError(path.string(), "line " + std::to_string(line_no) + ": bad number '" + f + "'");
      }
      return v;
    };
    Box b{num(fields[0]), num(fields[1]), num(fields[2]), num(fields[3]), 0, std::nullopt};
    int cat = 0;
    auto [ptr, ec] = std::from_chars(fields[4].data(), fields[4].data() + fields[4].size(), cat);
    if (ec != std::errc() || ptr != fields[4].data() + fields[4].size()) {
      throw CodecError(path.string(), "line " + std::to_string(line_no) + ": bad category");
    }
    b.category = cat;
    if (fields.size() == 6) b.score = num(fields[5]);
    boxes.push_back(b);
  }
  return boxes;
}

void encode_scene(const Scene& scene, const fs::path& dir) {
  write_ppm(scene.image, dir / (scene.id + ".ppm"));
  write_pgm(scene.mask, dir / (scene.id + ".pgm"));
  write_boxes(scene.boxes, dir / (scene.id + ".boxes"));
}

Scene decode_scene(const fs::path& dir, const std::string& id) {
  Scene s;
  s.id = id;
  const fs::path image_path = dir / (id + ".ppm");
  const fs::path mask_path = dir / (id + ".pgm");
  s.image = read_ppm(image_path);
  s.mask = read_pgm(mask_path);
  if (s.mask.height != s.image.dim(1) || s.mask.width != s.image.dim(2)) {
    throw CodecError(mask_path.string(), "mask is " + std::to_string(s.mask.width) + "x" +
                                             std::to_string(s.mask.height) + ", image is " +
                                             std::to_string(s.image.dim(2)) + "x" +
                                             std::to_string(s.image.dim(1)));
  }
  s.boxes = read_boxes(dir / (id + ".boxes"));
  return s;
}

void write_manifest(const DatasetManifest& m) {
  const fs::path path = m.root / "manifest.json";
  json doc = json::object();
  if (fs::exists(path)) {
    try {
      doc = json::parse(read_file(path));
    } catch (const json::exception& e) {
      throw CodecError(path.string(), e.what());
    }
  }
  doc["format"] = "saf-dataset";
  doc["version"] = 1;
  doc["height"] = m.height;
  doc["width"] = m.width;
  doc["categories"] = m.categories;
  doc["splits"][m.split] = json{{"seed", m.seed}, {"ids", m.ids}, {"generator", generator_to_json(m.generator)}};
  write_file(path, doc.dump(2) + "\n");
}

DatasetManifest read_manifest(const fs::path& root, const std::string& split) {
  const fs::path path = root / "manifest.json";
  const std::string text = read_file(path);
  DatasetManifest m;
  try {
    const json doc = json::parse(text);
    if (!doc.contains("splits") || !doc["splits"].contains(split)) {
      throw CodecError(path.string(), "no split named '" + split + "'");
    }
    const json& sp = doc["splits"][split];
    m.root = root;
    m.split = split;
    m.height = doc.at("height").get<int>();
    m.width = doc.at("width").get<int>();
    m.categories = doc.at("categories").get<int>();
    m.seed = sp.at("seed").get<uint64_t>();
    m.ids = sp.at("ids").get<std::vector<std::string>>();
    if (sp.contains("generator")) m.generator = generator_from_json(sp["generator"]);
  } catch (const json::exception& e) {
    throw CodecError(path.string(), e.what());
  }
  for (const auto& id : m.ids) {
    for (const char* ext : {".ppm", ".pgm", ".boxes"}) {
      const fs::path f = root / split / (id + ext);
      if (!fs::exists(f)) throw CodecError(f.string(), "listed in manifest but missing");
    }
  }
  return m;
}

DatasetManifest generate_dataset(const GeneratorConfig& cfg, uint64_t seed, int count,
                                 const fs::path& root, const std::string& split) {
  cfg.validate();
  if (count < 0) throw ConfigError("generate_dataset: count must be non-negative");
  DatasetManifest m;
  m.root = root;
  m.split = split;
  m.height = cfg.height;
  m.width = cfg.width;
  m.categories = cfg.categories;
  m.seed = seed;
  m.generator = cfg;
  const fs::path dir = root / split;
  fs::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    const GeneratedScene g = generate_scene(cfg, seed, split, i);
    encode_scene(g.scene, dir);
    m.ids.push_back(g.scene.id);
  }
  write_manifest(m);
  return m;
}

std::vector<Scene> load_split(const DatasetManifest& m) {
  std::vector<Scene> scenes;
  scenes.reserve(m.ids.size());
  for (const auto& id : m.ids) {
    Scene s = decode_scene(m.root / m.split, id);
    if (s.height() != m.height || s.width() != m.width) {
      throw CodecError((m.root / m.split / (id + ".ppm")).string(),
                       "image size does not match manifest");
    }
    scenes.push_back(std::move(s));
  }
  return scenes;
}

}  // namespace saf
