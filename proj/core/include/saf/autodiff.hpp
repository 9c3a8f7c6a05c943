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

// Reverse-mode automatic differentiation over dense float tensors.
//
// A Tape records primitive operations in execution order. Each recorded
// value is addressed through a Var handle; Tape::backward replays the record
// in strict reverse order, so the topological order is the recording order.
// A tape belongs to one thread. Storage is float32; every reduction inside
// the primitives (convolution sums, losses) accumulates in double.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "saf/tensor.hpp"

namespace saf {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  Tape& tape() const { return *tape_; }
  int32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int32_t id_ = -1;
};

struct BackwardArgs {
  const Tensor& grad_out;
  const Tensor& out;
  std::span<const Tensor* const> inputs;
  // Accumulators, one per input; nullptr when that input needs no gradient.
  std::span<Tensor* const> input_grads;
};

using BackwardFn = std::function<void(const BackwardArgs&)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Records a leaf value.
  Var variable(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return variable(std::move(value), false); }

  /// Records the result of a primitive. The node requires a gradient iff any
  /// input does; `backward` is dropped otherwise.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  /// Reverse pass seeded with d(out)/d(out) = 1; `out` must hold one element.
  /// Gradients from an earlier call are discarded first, so repeated calls
  /// produce identical results.
  void backward(Var out);
  void backward(Var out, const Tensor& seed);

  /// Gradient of the last backward output with respect to `v`. Zero-filled
  /// when `v` requires a gradient but did not influence the output.
  const Tensor& grad(Var v) const;
  bool has_grad(Var v) const;

  const Tensor& value(int32_t id) const { return nodes_[static_cast<size_t>(id)].value; }
  bool requires_grad(int32_t id) const {
    return nodes_[static_cast<size_t>(id)].requires_grad;
  }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    std::vector<int32_t> inputs;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::vector<bool> touched_;
};

// ---------------------------------------------------------------------------
// Primitives. Every Var argument must live on the same tape.

/// Cross-correlation. input (B, Cin, H, W), kernel (Cout, Cin, kh, kw),
/// bias (Cout). Output (B, Cout, (H + 2p - kh)/s + 1, (W + 2p - kw)/s + 1).
Var conv2d(Var input, Var kernel, Var bias, int stride, int padding);

/// max(0, x); the subgradient at 0 is 0.
Var relu(Var input);

/// Bilinear sampling. grid is (B, Ho, Wo, 2) holding normalized (x, y)
/// source coordinates in [-1, 1], where -1 and 1 are the outer edges of the
/// border pixels. Samples outside [-1, 1] return `fill` with zero gradient;
/// inside, the border pixel value extends to the frame edge. The grid is treated
/// as a constant. A grid batch of 1 is shared by every input batch item.
Var bilinear_sample(Var input, const Tensor& grid, float fill = 0.0f);

/// output[..., p] = input[..., permutation[p]] over the H*W positions of
/// every (batch, channel) plane. Throws InvalidPermutationError unless the
/// index vector is a bijection on [0, H*W).
Var gather_pixels(Var input, std::span<const int32_t> permutation);

/// Like gather_pixels but the index map need not be a bijection; entries of
/// -1 produce `fill` with zero gradient.
Var remap_pixels(Var input, std::span<const int32_t> index_map, float fill = 0.0f);

/// Mean negative log-softmax over the channel axis of logits (B, C, H, W),
/// taken over pixels whose target is not ignore_index. Returns +0 with zero
/// gradient when every pixel is ignored.
Var softmax_cross_entropy(Var logits, const LabelMap& target, int ignore_index = 255);

Var add(Var a, Var b);
/// a + constant tensor.
Var add(Var a, const Tensor& b);
Var mul(Var a, Var b);
Var scale(Var a, float factor);
/// Sum of all elements, shape (1).
Var sum(Var a);
/// Mean of all elements, shape (1).
Var mean(Var a);

/// Applies factor * relu(x) to channels [first, first + count) of a rank-4
/// tensor; other channels pass through unchanged.
Var relu_scale_channels(Var input, int first, int count, float factor);

}  // namespace saf
