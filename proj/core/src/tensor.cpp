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
#include "saf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "saf/errors.hpp"

namespace saf {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw DimensionError("negative extent in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape)),
      data_(static_cast<size_t>(shape_numel(shape_)), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != static_cast<int64_t>(data_.size())) {
    throw DimensionError("data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str(shape_));
  }
}

int64_t Tensor::dim(int axis) const {
  if (axis < 0) axis += rank();
  if (axis < 0 || axis >= rank()) {
    throw DimensionError("axis out of range for shape " + shape_str(shape_));
  }
  return shape_[static_cast<size_t>(axis)];
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

LabelMap stack_labels(std::span<const LabelMap> maps) {
  if (maps.empty()) return {};
  LabelMap out(0, maps[0].height, maps[0].width, 0);
  for (const auto& m : maps) {
    if (m.height != out.height || m.width != out.width) {
      throw DimensionError("stack_labels: mismatched label map sizes");
    }
    out.values.insert(out.values.end(), m.values.begin(), m.values.end());
    out.batch += m.batch;
  }
  return out;
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

template <typename F>
Tensor map_unary(const Tensor& a, F f) {
  Tensor out(a.shape());
  auto src = a.data();
  auto dst = out.data();
  for (size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] * b[i];
  return out;
}

Tensor scale(const Tensor& a, float factor) {
  return map_unary(a, [factor](float v) { return v * factor; });
}

Tensor clamp(const Tensor& a, float lo, float hi) {
  return map_unary(a, [lo, hi](float v) { return std::min(std::max(v, lo), hi); });
}

Tensor clamp(const Tensor& a, const Tensor& lo, const Tensor& hi) {
  require_same_shape(a, lo, "clamp");
  require_same_shape(a, hi, "clamp");
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) out[i] = std::min(std::max(a[i], lo[i]), hi[i]);
  return out;
}

Tensor sign(const Tensor& a) {
  return map_unary(a, [](float v) { return v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f); });
}

double mean(const Tensor& a) {
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (float v : a.data()) s += v;
  return s / static_cast<double>(a.numel());
}

double abs_sum(const Tensor& a) {
  double s = 0.0;
  for (float v : a.data()) s += std::fabs(static_cast<double>(v));
  return s;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    m = std::max(m, std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

bool all_finite(const Tensor& a) {
  return std::all_of(a.data().begin(), a.data().end(),
                     [](float v) { return std::isfinite(v); });
}

Tensor stack_batch(std::span<const Tensor> items) {
  if (items.empty()) throw DimensionError("stack_batch: no items");
  Shape shape = items[0].shape();
  if (shape.size() != 4) throw DimensionError("stack_batch: expected rank-4 tensors");
  std::vector<float> data;
  int64_t batch = 0;
  for (const auto& t : items) {
    if (t.rank() != 4 || t.dim(1) != shape[1] || t.dim(2) != shape[2] ||
        t.dim(3) != shape[3]) {
      throw DimensionError("stack_batch: mismatched item shape " + shape_str(t.shape()));
    }
    data.insert(data.end(), t.data().begin(), t.data().end());
    batch += t.dim(0);
  }
  shape[0] = batch;
  return Tensor(shape, std::move(data));
}

Tensor batch_item(const Tensor& t, int64_t b) {
  if (t.rank() != 4 || b < 0 || b >= t.dim(0)) {
    throw DimensionError("batch_item: index out of range for " + shape_str(t.shape()));
  }
  const int64_t per = t.dim(1) * t.dim(2) * t.dim(3);
  std::vector<float> data(t.data().begin() + b * per, t.data().begin() + (b + 1) * per);
  return Tensor({1, t.dim(1), t.dim(2), t.dim(3)}, std::move(data));
}

}  // namespace saf
