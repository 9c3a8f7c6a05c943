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
#include "saf/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "json.hpp"
#include "saf/errors.hpp"
#include "saf/metrics.hpp"
#include "saf/rng.hpp"
#include "saf/transforms.hpp"

namespace saf {

std::string_view task_name(Task task) {
  return task == Task::kSegmentation ? "segmentation" : "detection";
}

Task task_from_name(std::string_view name) {
  if (name == "segmentation") return Task::kSegmentation;
  if (name == "detection") return Task::kDetection;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Architecture.

int ModelArch::stride() const {
  int s = 1;
  for (const auto& l : layers) s *= l.stride;
  return s;
}

int ModelArch::head_channels() const {
  return task == Task::kSegmentation ? categories : 5 + categories;
}

void ModelArch::validate() const {
  if (categories < 2 || categories > 254) throw ConfigError("model: categories must lie in [2, 254]");
  if (layers.empty()) throw ConfigError("model: no layers");
  int channels = 3;
  for (const auto& l : layers) {
    if (l.in_channels != channels) throw ConfigError("model: layer channel chain is broken");
    if (l.out_channels < 1 || l.kernel < 1 || l.stride < 1 || l.padding < 0) {
      throw ConfigError("model: invalid layer geometry");
    }
    channels = l.out_channels;
  }
  if (channels != head_channels()) throw ConfigError("model: head width does not match the task");
  if (layers.back().relu) throw ConfigError("model: the head layer must be linear");
}

ModelArch ModelArch::segmenter(int categories, int width, int depth) {
  ModelArch a;
  a.task = Task::kSegmentation;
  a.categories = categories;
  int in = 3;
  for (int i = 0; i < depth; ++i) {
    a.layers.push_back({in, width, 3, 1, 1, true});
    in = width;
  }
  a.layers.push_back({in, categories, 1, 1, 0, false});
  return a;
}

ModelArch ModelArch::detector(int categories, int width) {
  ModelArch a;
  a.task = Task::kDetection;
  a.categories = categories;
  a.layers = {
      {3, 16, 3, 1, 1, true},
      {16, width, 3, 2, 1, true},
      {width, width, 3, 1, 1, true},
      {width, width, 3, 2, 1, true},
      {width, width, 3, 1, 1, true},
      {width, width, 3, 1, 1, true},
      {width, width, 3, 1, 1, true},
      {width, 5 + categories, 1, 1, 0, false},
  };
  return a;
}

std::string ModelArch::to_json() const {
  using nlohmann::json;
  json layers_json = json::array();
  for (const auto& l : layers) {
    layers_json.push_back({{"in", l.in_channels},
                           {"out", l.out_channels},
                           {"kernel", l.kernel},
                           {"stride", l.stride},
                           {"padding", l.padding},
                           {"relu", l.relu}});
  }
  return json{{"task", std::string(task_name(task))}, {"categories", categories}, {"layers", layers_json}}
      .dump();
}

ModelArch ModelArch::from_json(std::string_view text) {
  using nlohmann::json;
  ModelArch a;
  try {
    const json doc = json::parse(text);
    a.task = task_from_name(doc.at("task").get<std::string>());
    a.categories = doc.at("categories").get<int>();
    for (const json& l : doc.at("layers")) {
      a.layers.push_back({l.at("in").get<int>(), l.at("out").get<int>(), l.at("kernel").get<int>(),
                          l.at("stride").get<int>(), l.at("padding").get<int>(), l.at("relu").get<bool>()});
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model architecture: ") + e.what());
  }
  a.validate();
  return a;
}

// ---------------------------------------------------------------------------
// Model.

Model::Model(ModelArch arch, uint64_t seed) : arch_(std::move(arch)) {
  arch_.validate();
  Rng rng(derive_seed({seed, 0x6d6f64656cULL}));
  for (const auto& l : arch_.layers) {
    const int64_t fan_in = static_cast<int64_t>(l.in_channels) * l.kernel * l.kernel;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor kernel({l.out_channels, l.in_channels, l.kernel, l.kernel});
    for (int64_t i = 0; i < kernel.numel(); ++i) kernel[i] = static_cast<float>(rng.uniform(-bound, bound));
    params_.push_back(std::move(kernel));
    params_.emplace_back(Shape{l.out_channels}, 0.0f);
  }
  if (arch_.task == Task::kDetection) params_.back()[0] = -2.0f;  // objectness prior
}

Model Model::zeros(ModelArch arch) {
  arch.validate();
  Model m;
  m.arch_ = std::move(arch);
  for (const auto& l : m.arch_.layers) {
    m.params_.emplace_back(Shape{l.out_channels, l.in_channels, l.kernel, l.kernel}, 0.0f);
    m.params_.emplace_back(Shape{l.out_channels}, 0.0f);
  }
  return m;
}

std::vector<std::string> Model::parameter_names() const {
  std::vector<std::string> names;
  for (size_t i = 0; i < arch_.layers.size(); ++i) {
    names.push_back("layer" + std::to_string(i) + ".kernel");
    names.push_back("layer" + std::to_string(i) + ".bias");
  }
  return names;
}

Var Model::forward(Tape& tape, Var x) const { return forward_impl(tape, x, nullptr); }

Var Model::forward(Tape& tape, Var x, std::vector<Var>& params) const {
  return forward_impl(tape, x, &params);
}

Var Model::forward_impl(Tape& tape, Var x, std::vector<Var>* params) const {
  const Tensor& in = x.value();
  if (in.rank() != 4 || in.dim(1) != 3) {
    throw DimensionError("model: expected input (B, 3, H, W), got " + shape_str(in.shape()));
  }
  const int s = arch_.stride();
  if (in.dim(2) % s != 0 || in.dim(3) % s != 0) {
    throw ConfigError("model: input size is not divisible by the head stride " + std::to_string(s));
  }
  Var h = x;
  for (size_t i = 0; i < arch_.layers.size(); ++i) {
    const auto& l = arch_.layers[i];
    Var k, b;
    if (params) {
      k = tape.variable(params_[2 * i]);
      b = tape.variable(params_[2 * i + 1]);
      params->push_back(k);
      params->push_back(b);
    } else {
      k = tape.constant(params_[2 * i]);
      b = tape.constant(params_[2 * i + 1]);
    }
    h = conv2d(h, k, b, l.stride, l.padding);
    if (l.relu) h = relu(h);
  }
  if (arch_.task == Task::kDetection) {
    h = relu_scale_channels(h, 1 + arch_.categories, 4, static_cast<float>(s));
  }
  return h;
}

// ---------------------------------------------------------------------------
// Losses.

LossResult seg_loss(Var logits, const LabelMap& mask) {
  const bool empty = std::all_of(mask.values.begin(), mask.values.end(),
                                 [](uint8_t v) { return v == LabelMap::kIgnore; });
  return {softmax_cross_entropy(logits, mask, LabelMap::kIgnore), empty};
}

DetTargets assign_targets(const BoxSet& boxes, int64_t height, int64_t width, int stride,
                          const LabelMap* valid) {
  if (height % stride != 0 || width % stride != 0) {
    throw ConfigError("detector: frame is not divisible by the head stride");
  }
  DetTargets t;
  t.grid_h = height / stride;
  t.grid_w = width / stride;
  const size_t cells = static_cast<size_t>(t.grid_h * t.grid_w);
  t.state.assign(cells, 0);
  t.category.assign(cells, 0);
  t.ltrb.assign(cells, {0, 0, 0, 0});
  std::vector<double> owner_area(cells, INFINITY);
  for (const Box& b : boxes) {
    if (b.area() <= 0) continue;
    const double cx = 0.5 * (b.x0 + b.x1), cy = 0.5 * (b.y0 + b.y1);
    const int64_t gx = std::clamp<int64_t>(static_cast<int64_t>(std::floor(cx / stride)), 0, t.grid_w - 1);
    const int64_t gy = std::clamp<int64_t>(static_cast<int64_t>(std::floor(cy / stride)), 0, t.grid_h - 1);
    const size_t cell = static_cast<size_t>(gy * t.grid_w + gx);
    if (b.area() >= owner_area[cell]) continue;
    owner_area[cell] = b.area();
    const double ccx = (static_cast<double>(gx) + 0.5) * stride, ccy = (static_cast<double>(gy) + 0.5) * stride;
    t.state[cell] = 1;
    t.category[cell] = b.category;
    t.ltrb[cell] = {static_cast<float>(ccx - b.x0), static_cast<float>(ccy - b.y0),
                    static_cast<float>(b.x1 - ccx), static_cast<float>(b.y1 - ccy)};
  }
  if (valid) {
    if (valid->height != height || valid->width != width) {
      throw DimensionError("detector: validity map size does not match the frame");
    }
    for (int64_t gy = 0; gy < t.grid_h; ++gy) {
      for (int64_t gx = 0; gx < t.grid_w; ++gx) {
        const size_t cell = static_cast<size_t>(gy * t.grid_w + gx);
        if (t.state[cell] == 1) continue;
        if (valid->at(gy * stride + stride / 2, gx * stride + stride / 2) == LabelMap::kIgnore) {
          t.state[cell] = -1;
        }
      }
    }
  }
  return t;
}

LossResult det_loss(Var head, std::span<const DetTargets> targets, int stride) {
  const Tensor& h = head.value();
  if (h.rank() != 4 || h.dim(1) < 6) throw DimensionError("det_loss: head must be (B, 5 + C, G, G)");
  const int64_t batch = h.dim(0), channels = h.dim(1), gh = h.dim(2), gw = h.dim(3);
  const int64_t categories = channels - 5;
  if (static_cast<int64_t>(targets.size()) != batch) throw DimensionError("det_loss: one target set per item");
  int64_t n_obj = 0, n_pos = 0;
  for (const auto& t : targets) {
    if (t.grid_h != gh || t.grid_w != gw) throw DimensionError("det_loss: target grid does not match the head");
    for (int8_t s : t.state) {
      n_obj += s >= 0;
      n_pos += s == 1;
    }
  }
  Tensor grad(h.shape(), 0.0f);
  double obj = 0, cls = 0, box = 0;
  const double inv_obj = n_obj > 0 ? 1.0 / static_cast<double>(n_obj) : 0.0;
  const double inv_pos = n_pos > 0 ? 1.0 / static_cast<double>(n_pos) : 0.0;
  std::vector<double> prob(static_cast<size_t>(categories));
  for (int64_t b = 0; b < batch; ++b) {
    const DetTargets& t = targets[static_cast<size_t>(b)];
    for (int64_t gy = 0; gy < gh; ++gy) {
      for (int64_t gx = 0; gx < gw; ++gx) {
        const size_t cell = static_cast<size_t>(gy * gw + gx);
        const int8_t state = t.state[cell];
        if (state < 0) continue;
        const double z = h.at(b, 0, gy, gx), y = state;
        obj += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
        grad.at(b, 0, gy, gx) = static_cast<float>((1.0 / (1.0 + std::exp(-z)) - y) * inv_obj);
        if (state != 1) continue;
        const int cat = t.category[cell];
        if (cat < 0 || cat >= categories) throw InvalidLabelError("det_loss: box category out of range");
        double zmax = -INFINITY;
        for (int64_t c = 0; c < categories; ++c) zmax = std::max(zmax, static_cast<double>(h.at(b, 1 + c, gy, gx)));
        double zsum = 0;
        for (int64_t c = 0; c < categories; ++c) {
          prob[static_cast<size_t>(c)] = std::exp(h.at(b, 1 + c, gy, gx) - zmax);
          zsum += prob[static_cast<size_t>(c)];
        }
        cls += std::log(zsum) + zmax - h.at(b, 1 + cat, gy, gx);
        for (int64_t c = 0; c < categories; ++c) {
          const double p = prob[static_cast<size_t>(c)] / zsum - (c == cat ? 1.0 : 0.0);
          grad.at(b, 1 + c, gy, gx) = static_cast<float>(p * inv_pos);
        }
        for (int k = 0; k < 4; ++k) {
          const double d = (h.at(b, 1 + categories + k, gy, gx) - t.ltrb[cell][static_cast<size_t>(k)]) / stride;
          const double ad = std::abs(d);
          box += ad < 1.0 ? 0.5 * d * d : ad - 0.5;
          const double dd = ad < 1.0 ? d : (d > 0 ? 1.0 : -1.0);
          grad.at(b, 1 + categories + k, gy, gx) = static_cast<float>(dd / stride * inv_pos);
        }
      }
    }
  }
  const double loss = obj * inv_obj + cls * inv_pos + box * inv_pos;
  Var out = head.tape().record(Tensor::scalar(static_cast<float>(loss)), {head},
                               [grad = std::move(grad)](const BackwardArgs& a) {
                                 Tensor& g = *a.input_grads[0];
                                 const float s = a.grad_out[0];
                                 for (int64_t i = 0; i < g.numel(); ++i) g[i] += s * grad[i];
                               });
  return {out, n_obj == 0};
}

LossResult det_loss(Var head, const BoxSet& boxes, int64_t height, int64_t width, int stride,
                    const LabelMap* valid) {
  const DetTargets t = assign_targets(boxes, height, width, stride, valid);
  return det_loss(head, std::span<const DetTargets>(&t, 1), stride);
}

// ---------------------------------------------------------------------------
// Inference.

LabelMap predict_mask(const Model& model, const Tensor& x) {
  if (model.task() != Task::kSegmentation) throw ConfigError("predict_mask needs a segmenter");
  Tape tape;
  const Tensor& logits = model.forward(tape, tape.constant(x)).value();
  const int64_t batch = logits.dim(0), c = logits.dim(1), height = logits.dim(2), width = logits.dim(3);
  LabelMap out(batch, height, width, 0);
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t i = 0; i < height; ++i) {
      for (int64_t j = 0; j < width; ++j) {
        int best = 0;
        float best_v = logits.at(b, 0, i, j);
        for (int64_t k = 1; k < c; ++k) {
          const float v = logits.at(b, k, i, j);
          if (v > best_v) {
            best_v = v;
            best = static_cast<int>(k);
          }
        }
        out.values[static_cast<size_t>((b * height + i) * width + j)] = static_cast<uint8_t>(best);
      }
    }
  }
  return out;
}

namespace {

// Greedy suppression over boxes already in priority order; boxes of
// different categories never suppress each other.
BoxSet greedy_suppress(const BoxSet& ordered, double iou_threshold) {
  BoxSet kept;
  for (const Box& b : ordered) {
    bool suppressed = false;
    for (const Box& k : kept) {
      if (k.category == b.category && box_iou(k, b) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(b);
  }
  return kept;
}

}  // namespace

BoxSet nms(BoxSet boxes, double iou_threshold) {
  std::stable_sort(boxes.begin(), boxes.end(),
                   [](const Box& a, const Box& b) { return a.score.value_or(0) > b.score.value_or(0); });
  return greedy_suppress(boxes, iou_threshold);
}

BoxSet decode_head(const Tensor& head, int64_t batch_index, int stride, int64_t height,
                   int64_t width, int categories, const DecodeOptions& options) {
  if (head.rank() != 4 || head.dim(1) != 5 + categories) {
    throw DimensionError("decode: head must be (B, 5 + C, G, G)");
  }
  const int64_t gh = head.dim(2), gw = head.dim(3);
  BoxSet candidates;  // cell order
  for (int64_t gy = 0; gy < gh; ++gy) {
    for (int64_t gx = 0; gx < gw; ++gx) {
      const double p = 1.0 / (1.0 + std::exp(-static_cast<double>(head.at(batch_index, 0, gy, gx))));
      if (p < options.score_threshold) continue;
      double zmax = -INFINITY;
      int best = 0;
      for (int c = 0; c < categories; ++c) {
        const double z = head.at(batch_index, 1 + c, gy, gx);
        if (z > zmax) {
          zmax = z;
          best = c;
        }
      }
      double zsum = 0;
      for (int c = 0; c < categories; ++c) zsum += std::exp(head.at(batch_index, 1 + c, gy, gx) - zmax);
      const double cx = (static_cast<double>(gx) + 0.5) * stride, cy = (static_cast<double>(gy) + 0.5) * stride;
      Box b;
      b.x0 = std::clamp(cx - head.at(batch_index, 1 + categories, gy, gx), 0.0, static_cast<double>(width));
      b.y0 = std::clamp(cy - head.at(batch_index, 2 + categories, gy, gx), 0.0, static_cast<double>(height));
      b.x1 = std::clamp(cx + head.at(batch_index, 3 + categories, gy, gx), 0.0, static_cast<double>(width));
      b.y1 = std::clamp(cy + head.at(batch_index, 4 + categories, gy, gx), 0.0, static_cast<double>(height));
      b.category = best;
      b.score = p / zsum;
      if (b.area() > 0) candidates.push_back(b);
    }
  }
  return nms(std::move(candidates), options.nms_iou);
}

BoxSet predict_boxes(const Model& model, const Tensor& x, const DecodeOptions& options) {
  if (model.task() != Task::kDetection) throw ConfigError("predict_boxes needs a detector");
  Tape tape;
  const Tensor& head = model.forward(tape, tape.constant(x)).value();
  BoxSet out;
  for (int64_t b = 0; b < head.dim(0); ++b) {
    BoxSet item = decode_head(head, b, model.arch().stride(), x.dim(2), x.dim(3), model.categories(), options);
    out.insert(out.end(), item.begin(), item.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training.

void TrainConfig::validate() const {
  if (epochs < 0 || batch_size < 1 || !(learning_rate > 0) || momentum < 0 || momentum >= 1 ||
      weight_decay < 0 || clip_norm < 0) {
    throw ConfigError("train: invalid configuration");
  }
}

std::optional<double> validation_metric(const Model& model, const std::vector<Scene>& scenes) {
  if (scenes.empty()) return std::nullopt;
  if (model.task() == Task::kSegmentation) {
    IouAccumulator acc(model.categories());
    for (const Scene& s : scenes) acc.add(predict_mask(model, s.batched_image()), s.mask);
    return acc.miou();
  }
  std::vector<BoxSet> preds, gts;
  for (const Scene& s : scenes) {
    preds.push_back(predict_boxes(model, s.batched_image()));
    gts.push_back(s.boxes);
  }
  return map_50_95(preds, gts, model.categories()).map50;
}

std::vector<EpochLog> train(Model& model, const std::vector<Scene>& train_set,
                            const std::vector<Scene>& val_set, const TrainConfig& cfg,
                            const TrainProgress& progress) {
  cfg.validate();
  std::vector<EpochLog> log;
  if (cfg.epochs == 0 || train_set.empty()) return log;
  auto& params = model.parameters();
  std::vector<Tensor> velocity;
  for (const Tensor& p : params) velocity.emplace_back(p.shape(), 0.0f);
  const int stride = model.arch().stride();
  const TransformInstance flip(HFlipParams{});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed({cfg.seed, static_cast<uint64_t>(epoch), 0x747261696eULL}));
    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), size_t{0});
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);
    }
    const double lr = cfg.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / cfg.epochs));
    double loss_sum = 0;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      std::vector<Tensor> images;
      std::vector<LabelMap> masks;
      std::vector<DetTargets> targets;
      for (size_t k = start; k < end; ++k) {
        const Scene& s = train_set[order[k]];
        const bool flipped = cfg.augment && rng.bernoulli(0.5);
        Tensor img = s.batched_image();
        LabelMap mask = s.mask;
        BoxSet boxes = s.boxes;
        if (flipped) {
          img = apply_image(flip, img);
          mask = apply_mask(flip, mask);
          boxes = apply_boxes(flip, boxes, s.height(), s.width());
        }
        images.push_back(std::move(img));
        if (model.task() == Task::kSegmentation) {
          masks.push_back(std::move(mask));
        } else {
          targets.push_back(assign_targets(boxes, s.height(), s.width(), stride));
        }
      }
      Tape tape;
      std::vector<Var> pvars;
      Var x = tape.constant(stack_batch(images));
      Var out = model.forward(tape, x, pvars);
      Var loss = model.task() == Task::kSegmentation ? seg_loss(out, stack_labels(masks)).loss
                                                     : det_loss(out, targets, stride).loss;
      const double value = loss.value()[0];
      if (!std::isfinite(value)) throw DivergenceError("training epoch", epoch);
      tape.backward(loss);
      double norm_sq = 0;
      for (const Var& v : pvars) {
        for (float g : tape.grad(v).values()) norm_sq += static_cast<double>(g) * g;
      }
      const double norm = std::sqrt(norm_sq);
      const double clip = cfg.clip_norm > 0 && norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;
      for (size_t i = 0; i < params.size(); ++i) {
        const Tensor& g = tape.grad(pvars[i]);
        Tensor& p = params[i];
        Tensor& v = velocity[i];
        for (int64_t j = 0; j < p.numel(); ++j) {
          const double step = clip * g[j] + cfg.weight_decay * p[j];
          v[j] = static_cast<float>(cfg.momentum * v[j] + step);
          p[j] = static_cast<float>(p[j] - lr * v[j]);
        }
      }
      loss_sum += value;
      ++batches;
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = loss_sum / batches;
    if (!std::isfinite(entry.loss)) throw DivergenceError("training epoch", epoch);
    const bool last = epoch + 1 == cfg.epochs;
    if (!val_set.empty() && (last || progress)) entry.val_metric = validation_metric(model, val_set);
    log.push_back(entry);
    if (progress) progress(entry);
  }
  return log;
}

// ---------------------------------------------------------------------------
// Checkpoints.

namespace {

constexpr char kMagic[4] = {'S', 'A', 'F', 'M'};
constexpr uint32_t kCheckpointVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::ostream& os, uint64_t v) {
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  std::istream& is;
  const std::string& path;

  uint64_t bytes(int n) {
    uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      const int c = is.get();
      if (c == EOF) throw CodecError(path, "truncated checkpoint");
      v |= static_cast<uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
  }
  uint32_t u32() { return static_cast<uint32_t>(bytes(4)); }
  std::string str(uint32_t n) {
    if (n > (1u << 24)) throw CodecError(path, "implausible string length");
    std::string s(n, '\0');
    if (!is.read(s.data(), n)) throw CodecError(path, "truncated checkpoint");
    return s;
  }
};

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CodecError(path.string(), "cannot open for writing");
  os.write(kMagic, 4);
  put_u32(os, kCheckpointVersion);
  const std::string arch = model.arch().to_json();
  put_u32(os, static_cast<uint32_t>(arch.size()));
  os.write(arch.data(), static_cast<std::streamsize>(arch.size()));
  const auto names = model.parameter_names();
  put_u32(os, static_cast<uint32_t>(names.size()));
  for (size_t i = 0; i < names.size(); ++i) {
    const Tensor& t = model.parameters()[i];
    put_u32(os, static_cast<uint32_t>(names[i].size()));
    os.write(names[i].data(), static_cast<std::streamsize>(names[i].size()));
    put_u32(os, static_cast<uint32_t>(t.rank()));
    for (int64_t d : t.shape()) put_u64(os, static_cast<uint64_t>(d));
    for (float v : t.values()) put_u32(os, std::bit_cast<uint32_t>(v));
  }
  if (!os) throw CodecError(path.string(), "write failed");
}

Model load_checkpoint(const std::filesystem::path& path) {
  const std::string p = path.string();
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CodecError(p, "cannot open checkpoint");
  Reader r{is, p};
  if (r.str(4) != std::string(kMagic, 4)) throw CodecError(p, "not a checkpoint (bad magic)");
  if (r.u32() != kCheckpointVersion) throw CodecError(p, "unsupported checkpoint version");
  ModelArch arch;
  try {
    arch = ModelArch::from_json(r.str(r.u32()));
  } catch (const ConfigError& e) {
    throw CodecError(p, e.what());
  }
  Model model = Model::zeros(arch);
  const auto names = model.parameter_names();
  if (r.u32() != names.size()) throw CodecError(p, "tensor count does not match the architecture");
  for (size_t i = 0; i < names.size(); ++i) {
    if (r.str(r.u32()) != names[i]) throw CodecError(p, "unexpected tensor name");
    Tensor& t = model.parameters()[i];
    const uint32_t rank = r.u32();
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<int64_t>(r.bytes(8));
    if (shape != t.shape()) throw CodecError(p, "tensor " + names[i] + " has shape " + shape_str(shape));
    for (int64_t j = 0; j < t.numel(); ++j) t[j] = std::bit_cast<float>(r.u32());
  }
  if (is.peek() != EOF) throw CodecError(p, "trailing bytes after the last tensor");
  return model;
}

}  // namespace saf
