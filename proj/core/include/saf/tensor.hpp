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

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace saf {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major float32 array. Image tensors are laid out (B, C, H, W).
///
/// A Tensor is a plain value; participation in differentiation goes through
/// a Tape (see autodiff.hpp), which owns the recorded values and gradients.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);
  Tensor(std::initializer_list<int64_t> shape, std::vector<float> data)
      : Tensor(Shape(shape), std::move(data)) {}

  /// Shape (1) holding v.
  static Tensor scalar(float v) { return Tensor(Shape{1}, std::vector<float>{v}); }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int axis) const;
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }
  const std::vector<float>& values() const { return data_; }

  float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }
  float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }

  // Rank-4 accessors.
  float at(int64_t b, int64_t c, int64_t h, int64_t w) const {
    return data_[static_cast<size_t>(((b * shape_[1] + c) * shape_[2] + h) *
                                         shape_[3] +
                                     w)];
  }
  float& at(int64_t b, int64_t c, int64_t h, int64_t w) {
    return data_[static_cast<size_t>(((b * shape_[1] + c) * shape_[2] + h) *
                                         shape_[3] +
                                     w)];
  }

  Tensor reshaped(Shape shape) const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

/// Per-pixel category map with a leading batch axis, (B, H, W).
/// Value 255 is the ignore label.
struct LabelMap {
  static constexpr uint8_t kIgnore = 255;

  int64_t batch = 1;
  int64_t height = 0;
  int64_t width = 0;
  std::vector<uint8_t> values;

  LabelMap() = default;
  LabelMap(int64_t h, int64_t w, uint8_t fill = 0)
      : height(h), width(w), values(static_cast<size_t>(h * w), fill) {}
  LabelMap(int64_t b, int64_t h, int64_t w, uint8_t fill)
      : batch(b), height(h), width(w), values(static_cast<size_t>(b * h * w), fill) {}

  int64_t numel() const { return batch * height * width; }
  uint8_t at(int64_t i, int64_t j) const {
    return values[static_cast<size_t>(i * width + j)];
  }
  uint8_t& at(int64_t i, int64_t j) {
    return values[static_cast<size_t>(i * width + j)];
  }
  uint8_t at(int64_t b, int64_t i, int64_t j) const {
    return values[static_cast<size_t>((b * height + i) * width + j)];
  }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

/// Concatenates single-image maps of equal size along the batch axis.
LabelMap stack_labels(std::span<const LabelMap> maps);

// Elementwise suite. These operate on values outside any tape; the attack
// update step uses them between gradient evaluations.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float factor);
Tensor clamp(const Tensor& a, float lo, float hi);
/// Elementwise clamp into [lo[i], hi[i]].
Tensor clamp(const Tensor& a, const Tensor& lo, const Tensor& hi);
/// sign(0) = 0.
Tensor sign(const Tensor& a);
double mean(const Tensor& a);
/// L1 norm with 64-bit accumulation.
double abs_sum(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& a);

/// Concatenates rank-4 tensors of identical (C, H, W) along the batch axis.
Tensor stack_batch(std::span<const Tensor> items);
/// Extracts one batch item of a rank-4 tensor, keeping a batch axis of 1.
Tensor batch_item(const Tensor& t, int64_t b);

}  // namespace saf
