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
#include "saf/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "saf/errors.hpp"

namespace saf {

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::variable(Tensor value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), requires_grad, {}, {}});
  return Var(this, static_cast<int32_t>(nodes_.size() - 1));
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  for (const Var& v : inputs) {
    if (&v.tape() != this) throw Error("Tape::record: input from another tape");
    node.inputs.push_back(v.id());
    node.requires_grad = node.requires_grad || v.requires_grad();
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int32_t>(nodes_.size() - 1));
}

void Tape::backward(Var out) {
  if (out.value().numel() != 1) {
    throw DimensionError("backward: output must hold one element, got shape " +
                         shape_str(out.shape()));
  }
  backward(out, Tensor(out.shape(), 1.0f));
}

void Tape::backward(Var out, const Tensor& seed) {
  if (&out.tape() != this) throw Error("Tape::backward: output from another tape");
  if (seed.shape() != out.shape()) throw DimensionError("backward: seed shape mismatch");
  grads_.assign(nodes_.size(), Tensor());
  touched_.assign(nodes_.size(), false);
  if (out.requires_grad()) {
    grads_[static_cast<size_t>(out.id())] = seed;
    touched_[static_cast<size_t>(out.id())] = true;
  }
  std::vector<const Tensor*> inputs;
  std::vector<Tensor*> input_grads;
  for (int32_t id = out.id(); id >= 0; --id) {
    const auto idx = static_cast<size_t>(id);
    Node& node = nodes_[idx];
    if (!touched_[idx] || !node.backward) continue;
    inputs.clear();
    input_grads.clear();
    for (int32_t in : node.inputs) {
      const auto in_idx = static_cast<size_t>(in);
      inputs.push_back(&nodes_[in_idx].value);
      if (nodes_[in_idx].requires_grad) {
        if (!touched_[in_idx]) {
          grads_[in_idx] = Tensor(nodes_[in_idx].value.shape(), 0.0f);
          touched_[in_idx] = true;
        }
        input_grads.push_back(&grads_[in_idx]);
      } else {
        input_grads.push_back(nullptr);
      }
    }
    node.backward(BackwardArgs{grads_[idx], node.value, inputs, input_grads});
  }
  // Values that require a gradient but did not reach the output get zeros.
  for (size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].requires_grad && !touched_[i]) {
      grads_[i] = Tensor(nodes_[i].value.shape(), 0.0f);
      touched_[i] = true;
    }
  }
}

bool Tape::has_grad(Var v) const {
  return static_cast<size_t>(v.id()) < touched_.size() &&
         touched_[static_cast<size_t>(v.id())];
}

const Tensor& Tape::grad(Var v) const {
  const auto idx = static_cast<size_t>(v.id());
  if (idx >= grads_.size()) throw Error("Tape::grad: backward has not run");
  if (!nodes_[idx].requires_grad) throw Error("Tape::grad: value does not require grad");
  return grads_[idx];
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw Error("operands recorded on different tapes");
}

struct ConvGeometry {
  int64_t batch, in_ch, height, width;
  int64_t out_ch, kh, kw;
  int64_t out_h, out_w;
  int stride, pad;

  int64_t k() const { return in_ch * kh * kw; }
  int64_t p() const { return out_h * out_w; }
};

// cols(row = (ci, ky, kx), col = output pixel) for one batch item.
void im2col(const float* in, const ConvGeometry& g, RowMatrix& cols) {
  cols.resize(g.k(), g.p());
  for (int64_t ci = 0; ci < g.in_ch; ++ci) {
    const float* plane = in + ci * g.height * g.width;
    for (int64_t ky = 0; ky < g.kh; ++ky) {
      for (int64_t kx = 0; kx < g.kw; ++kx) {
        double* row = cols.data() + ((ci * g.kh + ky) * g.kw + kx) * g.p();
        for (int64_t oy = 0; oy < g.out_h; ++oy) {
          const int64_t iy = oy * g.stride - g.pad + ky;
          double* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const float* src_row = plane + iy * g.width;
          for (int64_t ox = 0; ox < g.out_w; ++ox) {
            const int64_t ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix < 0 || ix >= g.width) ? 0.0 : static_cast<double>(src_row[ix]);
          }
        }
      }
    }
  }
}

// Scatters cols back onto the input grid in double, then adds into grad_in.
void col2im_add(const RowMatrix& cols, const ConvGeometry& g, float* grad_in) {
  std::vector<double> acc(static_cast<size_t>(g.in_ch * g.height * g.width), 0.0);
  for (int64_t ci = 0; ci < g.in_ch; ++ci) {
    double* plane = acc.data() + ci * g.height * g.width;
    for (int64_t ky = 0; ky < g.kh; ++ky) {
      for (int64_t kx = 0; kx < g.kw; ++kx) {
        const double* row = cols.data() + ((ci * g.kh + ky) * g.kw + kx) * g.p();
        for (int64_t oy = 0; oy < g.out_h; ++oy) {
          const int64_t iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.height) continue;
          for (int64_t ox = 0; ox < g.out_w; ++ox) {
            const int64_t ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= g.width) continue;
            plane[iy * g.width + ix] += row[oy * g.out_w + ox];
          }
        }
      }
    }
  }
  for (size_t i = 0; i < acc.size(); ++i) grad_in[i] += static_cast<float>(acc[i]);
}

RowMatrix to_matrix(std::span<const float> data, int64_t rows, int64_t cols) {
  RowMatrix m(rows, cols);
  for (int64_t i = 0; i < rows * cols; ++i) m.data()[i] = static_cast<double>(data[i]);
  return m;
}

}  // namespace

Var conv2d(Var input, Var kernel, Var bias, int stride, int padding) {
  check_same_tape(input, kernel);
  check_same_tape(input, bias);
  const Tensor& x = input.value();
  const Tensor& w = kernel.value();
  const Tensor& b = bias.value();
  if (x.rank() != 4) throw DimensionError("conv2d: input must be rank 4, got " + shape_str(x.shape()));
  if (w.rank() != 4) throw DimensionError("conv2d: kernel must be rank 4, got " + shape_str(w.shape()));
  if (w.dim(1) != x.dim(1)) {
    throw DimensionError("conv2d: kernel expects " + std::to_string(w.dim(1)) +
                         " input channels, input has " + std::to_string(x.dim(1)));
  }
  if (b.numel() != w.dim(0)) throw DimensionError("conv2d: bias length must equal output channels");
  if (stride < 1 || padding < 0) throw DimensionError("conv2d: stride must be >= 1 and padding >= 0");

  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), w.dim(3),
                 0, 0, stride, padding};
  g.out_h = (g.height + 2 * padding - g.kh) / stride + 1;
  g.out_w = (g.width + 2 * padding - g.kw) / stride + 1;
  if (g.height + 2 * padding < g.kh || g.width + 2 * padding < g.kw) {
    throw DimensionError("conv2d: kernel larger than padded input");
  }

  const RowMatrix wm = to_matrix(w.data(), g.out_ch, g.k());
  Tensor out({g.batch, g.out_ch, g.out_h, g.out_w});
  RowMatrix cols;
  RowMatrix result(g.out_ch, g.p());
  const int64_t in_plane = g.in_ch * g.height * g.width;
  const int64_t out_plane = g.out_ch * g.p();
  for (int64_t n = 0; n < g.batch; ++n) {
    im2col(x.data().data() + n * in_plane, g, cols);
    result.noalias() = wm * cols;
    float* dst = out.data().data() + n * out_plane;
    for (int64_t co = 0; co < g.out_ch; ++co) {
      const double bias_v = static_cast<double>(b[co]);
      for (int64_t p = 0; p < g.p(); ++p) {
        dst[co * g.p() + p] = static_cast<float>(result(co, p) + bias_v);
      }
    }
  }

  return input.tape().record(
      std::move(out), {input, kernel, bias}, [g](const BackwardArgs& a) {
        const Tensor& x = *a.inputs[0];
        const Tensor& w = *a.inputs[1];
        Tensor* gx = a.input_grads[0];
        Tensor* gw = a.input_grads[1];
        Tensor* gb = a.input_grads[2];
        const int64_t in_plane = g.in_ch * g.height * g.width;
        const int64_t out_plane = g.out_ch * g.p();
        RowMatrix cols;
        RowMatrix dcols;
        RowMatrix dw;
        RowMatrix wm;
        if (gw) dw = RowMatrix::Zero(g.out_ch, g.k());
        if (gx) wm = to_matrix(w.data(), g.out_ch, g.k());
        std::vector<double> db(static_cast<size_t>(g.out_ch), 0.0);
        for (int64_t n = 0; n < g.batch; ++n) {
          const RowMatrix dout =
              to_matrix(a.grad_out.data().subspan(static_cast<size_t>(n * out_plane),
                                                  static_cast<size_t>(out_plane)),
                        g.out_ch, g.p());
          if (gw) {
            im2col(x.data().data() + n * in_plane, g, cols);
            dw.noalias() += dout * cols.transpose();
          }
          if (gb) {
            for (int64_t co = 0; co < g.out_ch; ++co) db[static_cast<size_t>(co)] += dout.row(co).sum();
          }
          if (gx) {
            dcols.noalias() = wm.transpose() * dout;
            col2im_add(dcols, g, gx->data().data() + n * in_plane);
          }
        }
        if (gw) {
          for (int64_t i = 0; i < dw.size(); ++i) (*gw)[i] += static_cast<float>(dw.data()[i]);
        }
        if (gb) {
          for (int64_t co = 0; co < g.out_ch; ++co) (*gb)[co] += static_cast<float>(db[static_cast<size_t>(co)]);
        }
      });
}

Var relu(Var input) {
  const Tensor& x = input.value();
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;
  return input.tape().record(std::move(out), {input}, [](const BackwardArgs& a) {
    const Tensor& x = *a.inputs[0];
    Tensor& gx = *a.input_grads[0];
    for (int64_t i = 0; i < x.numel(); ++i) {
      if (x[i] > 0.0f) gx[i] += a.grad_out[i];
    }
  });
}

namespace {

struct BilinearTap {
  int64_t x0, y0;
  float wx0, wx1, wy0, wy1;
  bool inside;
};

BilinearTap bilinear_tap(float u, float v, int64_t height, int64_t width) {
  BilinearTap t{};
  if (!(u >= -1.0f && u <= 1.0f && v >= -1.0f && v <= 1.0f)) {
    t.inside = false;
    return t;
  }
  t.inside = true;
  double ix = (static_cast<double>(u) + 1.0) * static_cast<double>(width) * 0.5 - 0.5;
  double iy = (static_cast<double>(v) + 1.0) * static_cast<double>(height) * 0.5 - 0.5;
  // Between a border pixel centre and the frame edge the border value holds.
  ix = std::clamp(ix, 0.0, static_cast<double>(width - 1));
  iy = std::clamp(iy, 0.0, static_cast<double>(height - 1));
  // Coordinates within float rounding of a pixel centre land on it exactly,
  // so identity-like grids reproduce their input bit for bit.
  auto snap = [](double c) {
    const double r = std::round(c);
    return std::abs(c - r) < 1e-4 ? r : c;
  };
  ix = snap(ix);
  iy = snap(iy);
  const double fx = std::floor(ix);
  const double fy = std::floor(iy);
  t.x0 = static_cast<int64_t>(fx);
  t.y0 = static_cast<int64_t>(fy);
  t.wx1 = static_cast<float>(ix - fx);
  t.wy1 = static_cast<float>(iy - fy);
  t.wx0 = 1.0f - t.wx1;
  t.wy0 = 1.0f - t.wy1;
  return t;
}

}  // namespace

Var bilinear_sample(Var input, const Tensor& grid, float fill) {
  const Tensor& x = input.value();
  if (x.rank() != 4) throw DimensionError("bilinear_sample: input must be rank 4");
  if (grid.rank() != 4 || grid.dim(3) != 2) {
    throw DimensionError("bilinear_sample: grid must be (B, Ho, Wo, 2), got " +
                         shape_str(grid.shape()));
  }
  if (grid.dim(0) != 1 && grid.dim(0) != x.dim(0)) {
    throw DimensionError("bilinear_sample: grid batch must be 1 or match input");
  }
  const int64_t batch = x.dim(0), channels = x.dim(1), height = x.dim(2), width = x.dim(3);
  const int64_t out_h = grid.dim(1), out_w = grid.dim(2);
  Tensor out({batch, channels, out_h, out_w});

  auto taps_for = [grid, height, width, out_h, out_w](int64_t b) {
    const int64_t gb = grid.dim(0) == 1 ? 0 : b;
    std::vector<BilinearTap> taps(static_cast<size_t>(out_h * out_w));
    for (int64_t p = 0; p < out_h * out_w; ++p) {
      const float u = grid[(gb * out_h * out_w + p) * 2];
      const float v = grid[(gb * out_h * out_w + p) * 2 + 1];
      taps[static_cast<size_t>(p)] = bilinear_tap(u, v, height, width);
    }
    return taps;
  };

  for (int64_t b = 0; b < batch; ++b) {
    const auto taps = taps_for(b);
    for (int64_t c = 0; c < channels; ++c) {
      const float* src = x.data().data() + (b * channels + c) * height * width;
      float* dst = out.data().data() + (b * channels + c) * out_h * out_w;
      for (int64_t p = 0; p < out_h * out_w; ++p) {
        const BilinearTap& t = taps[static_cast<size_t>(p)];
        if (!t.inside) {
          dst[p] = fill;
          continue;
        }
        double acc = 0.0;
        auto tap = [&](int64_t yy, int64_t xx, float w) {
          if (yy >= 0 && yy < height && xx >= 0 && xx < width) {
            acc += static_cast<double>(w) * static_cast<double>(src[yy * width + xx]);
          }
        };
        tap(t.y0, t.x0, t.wy0 * t.wx0);
        tap(t.y0, t.x0 + 1, t.wy0 * t.wx1);
        tap(t.y0 + 1, t.x0, t.wy1 * t.wx0);
        tap(t.y0 + 1, t.x0 + 1, t.wy1 * t.wx1);
        dst[p] = static_cast<float>(acc);
      }
    }
  }

  return input.tape().record(
      std::move(out), {input},
      [taps_for, batch, channels, height, width, out_h, out_w](const BackwardArgs& a) {
        Tensor& gx = *a.input_grads[0];
        for (int64_t b = 0; b < batch; ++b) {
          const auto taps = taps_for(b);
          for (int64_t c = 0; c < channels; ++c) {
            float* dsrc = gx.data().data() + (b * channels + c) * height * width;
            const float* dout = a.grad_out.data().data() + (b * channels + c) * out_h * out_w;
            for (int64_t p = 0; p < out_h * out_w; ++p) {
              const BilinearTap& t = taps[static_cast<size_t>(p)];
              if (!t.inside) continue;
              const float go = dout[p];
              auto scatter = [&](int64_t yy, int64_t xx, float w) {
                if (yy >= 0 && yy < height && xx >= 0 && xx < width) dsrc[yy * width + xx] += w * go;
              };
              scatter(t.y0, t.x0, t.wy0 * t.wx0);
              scatter(t.y0, t.x0 + 1, t.wy0 * t.wx1);
              scatter(t.y0 + 1, t.x0, t.wy1 * t.wx0);
              scatter(t.y0 + 1, t.x0 + 1, t.wy1 * t.wx1);
            }
          }
        }
      });
}

namespace {

Var remap_impl(Var input, std::vector<int32_t> index, float fill) {
  const Tensor& x = input.value();
  const int64_t planes = x.dim(0) * x.dim(1);
  const int64_t n = x.dim(2) * x.dim(3);
  Tensor out(x.shape());
  for (int64_t pl = 0; pl < planes; ++pl) {
    const float* src = x.data().data() + pl * n;
    float* dst = out.data().data() + pl * n;
    for (int64_t p = 0; p < n; ++p) {
      const int32_t s = index[static_cast<size_t>(p)];
      dst[p] = s < 0 ? fill : src[s];
    }
  }
  return input.tape().record(std::move(out), {input},
                             [index = std::move(index), planes, n](const BackwardArgs& a) {
                               Tensor& gx = *a.input_grads[0];
                               for (int64_t pl = 0; pl < planes; ++pl) {
                                 float* dsrc = gx.data().data() + pl * n;
                                 const float* dout = a.grad_out.data().data() + pl * n;
                                 for (int64_t p = 0; p < n; ++p) {
                                   const int32_t s = index[static_cast<size_t>(p)];
                                   if (s >= 0) dsrc[s] += dout[p];
                                 }
                               }
                             });
}

}  // namespace

Var gather_pixels(Var input, std::span<const int32_t> permutation) {
  const Tensor& x = input.value();
  if (x.rank() != 4) throw DimensionError("gather_pixels: input must be rank 4");
  const int64_t n = x.dim(2) * x.dim(3);
  if (static_cast<int64_t>(permutation.size()) != n) {
    throw InvalidPermutationError("gather_pixels: index vector has " +
                                  std::to_string(permutation.size()) + " entries for " +
                                  std::to_string(n) + " positions");
  }
  std::vector<bool> seen(static_cast<size_t>(n), false);
  for (int32_t s : permutation) {
    if (s < 0 || s >= n || seen[static_cast<size_t>(s)]) {
      throw InvalidPermutationError("gather_pixels: index vector is not a bijection");
    }
    seen[static_cast<size_t>(s)] = true;
  }
  return remap_impl(input, {permutation.begin(), permutation.end()}, 0.0f);
}

Var remap_pixels(Var input, std::span<const int32_t> index_map, float fill) {
  const Tensor& x = input.value();
  if (x.rank() != 4) throw DimensionError("remap_pixels: input must be rank 4");
  const int64_t n = x.dim(2) * x.dim(3);
  if (static_cast<int64_t>(index_map.size()) != n) {
    throw DimensionError("remap_pixels: index map size does not match H*W");
  }
  for (int32_t s : index_map) {
    if (s < -1 || s >= n) throw DimensionError("remap_pixels: index out of range");
  }
  return remap_impl(input, {index_map.begin(), index_map.end()}, fill);
}

Var softmax_cross_entropy(Var logits, const LabelMap& target, int ignore_index) {
  const Tensor& z = logits.value();
  if (z.rank() != 4) throw DimensionError("softmax_cross_entropy: logits must be (B, C, H, W)");
  const int64_t batch = z.dim(0), classes = z.dim(1), height = z.dim(2), width = z.dim(3);
  if (target.batch != batch || target.height != height || target.width != width) {
    throw DimensionError("softmax_cross_entropy: target shape does not match logits");
  }
  const int64_t hw = height * width;
  int64_t counted = 0;
  for (uint8_t t : target.values) {
    if (static_cast<int>(t) == ignore_index) continue;
    if (t >= classes) {
      throw InvalidLabelError("softmax_cross_entropy: category " + std::to_string(t) +
                              " outside [0, " + std::to_string(classes) + ")");
    }
    ++counted;
  }
  double total = 0.0;
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t p = 0; p < hw; ++p) {
      const int t = target.values[static_cast<size_t>(b * hw + p)];
      if (t == ignore_index) continue;
      const float* base = z.data().data() + b * classes * hw + p;
      double mx = base[0];
      for (int64_t c = 1; c < classes; ++c) mx = std::max(mx, static_cast<double>(base[c * hw]));
      double se = 0.0;
      for (int64_t c = 0; c < classes; ++c) se += std::exp(static_cast<double>(base[c * hw]) - mx);
      total += mx + std::log(se) - static_cast<double>(base[t * hw]);
    }
  }
  const double loss = counted > 0 ? total / static_cast<double>(counted) : 0.0;
  return logits.tape().record(
      Tensor::scalar(static_cast<float>(loss)), {logits},
      [target, ignore_index, counted, batch, classes, hw](const BackwardArgs& a) {
        if (counted == 0) return;
        const Tensor& z = *a.inputs[0];
        Tensor& gz = *a.input_grads[0];
        const double coeff = static_cast<double>(a.grad_out[0]) / static_cast<double>(counted);
        std::vector<double> prob(static_cast<size_t>(classes));
        for (int64_t b = 0; b < batch; ++b) {
          for (int64_t p = 0; p < hw; ++p) {
            const int t = target.values[static_cast<size_t>(b * hw + p)];
            if (t == ignore_index) continue;
            const float* base = z.data().data() + b * classes * hw + p;
            float* gbase = gz.data().data() + b * classes * hw + p;
            double mx = base[0];
            for (int64_t c = 1; c < classes; ++c) mx = std::max(mx, static_cast<double>(base[c * hw]));
            double se = 0.0;
            for (int64_t c = 0; c < classes; ++c) {
              prob[static_cast<size_t>(c)] = std::exp(static_cast<double>(base[c * hw]) - mx);
              se += prob[static_cast<size_t>(c)];
            }
            for (int64_t c = 0; c < classes; ++c) {
              const double g = prob[static_cast<size_t>(c)] / se - (c == t ? 1.0 : 0.0);
              gbase[c * hw] += static_cast<float>(coeff * g);
            }
          }
        }
      });
}

Var add(Var a, Var b) {
  check_same_tape(a, b);
  if (a.shape() != b.shape()) throw DimensionError("add: shape mismatch");
  return a.tape().record(saf::add(a.value(), b.value()), {a, b}, [](const BackwardArgs& args) {
    for (Tensor* g : args.input_grads) {
      if (!g) continue;
      for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] += args.grad_out[i];
    }
  });
}

Var add(Var a, const Tensor& b) {
  if (a.shape() != b.shape()) throw DimensionError("add: shape mismatch");
  return a.tape().record(saf::add(a.value(), b), {a}, [](const BackwardArgs& args) {
    Tensor& g = *args.input_grads[0];
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += args.grad_out[i];
  });
}

Var mul(Var a, Var b) {
  check_same_tape(a, b);
  if (a.shape() != b.shape()) throw DimensionError("mul: shape mismatch");
  return a.tape().record(saf::mul(a.value(), b.value()), {a, b}, [](const BackwardArgs& args) {
    const Tensor& x = *args.inputs[0];
    const Tensor& y = *args.inputs[1];
    if (Tensor* gx = args.input_grads[0]) {
      for (int64_t i = 0; i < gx->numel(); ++i) (*gx)[i] += args.grad_out[i] * y[i];
    }
    if (Tensor* gy = args.input_grads[1]) {
      for (int64_t i = 0; i < gy->numel(); ++i) (*gy)[i] += args.grad_out[i] * x[i];
    }
  });
}

Var scale(Var a, float factor) {
  return a.tape().record(saf::scale(a.value(), factor), {a}, [factor](const BackwardArgs& args) {
    Tensor& g = *args.input_grads[0];
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += factor * args.grad_out[i];
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (float v : a.value().data()) s += v;
  return a.tape().record(Tensor::scalar(static_cast<float>(s)), {a}, [](const BackwardArgs& args) {
    Tensor& g = *args.input_grads[0];
    const float go = args.grad_out[0];
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += go;
  });
}

Var mean(Var a) {
  const int64_t n = a.value().numel();
  const double m = saf::mean(a.value());
  return a.tape().record(Tensor::scalar(static_cast<float>(m)), {a}, [n](const BackwardArgs& args) {
    Tensor& g = *args.input_grads[0];
    const float go = args.grad_out[0] / static_cast<float>(n);
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += go;
  });
}

Var relu_scale_channels(Var input, int first, int count, float factor) {
  const Tensor& x = input.value();
  if (x.rank() != 4 || first < 0 || count < 0 || first + count > x.dim(1)) {
    throw DimensionError("relu_scale_channels: channel range outside input");
  }
  const int64_t batch = x.dim(0), channels = x.dim(1), hw = x.dim(2) * x.dim(3);
  auto in_range = [first, count](int64_t c) { return c >= first && c < first + count; };
  Tensor out = x;
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t c = 0; c < channels; ++c) {
      if (!in_range(c)) continue;
      float* p = out.data().data() + (b * channels + c) * hw;
      for (int64_t i = 0; i < hw; ++i) p[i] = p[i] > 0.0f ? factor * p[i] : 0.0f;
    }
  }
  return input.tape().record(
      std::move(out), {input}, [in_range, factor, batch, channels, hw](const BackwardArgs& a) {
        const Tensor& x = *a.inputs[0];
        Tensor& gx = *a.input_grads[0];
        for (int64_t b = 0; b < batch; ++b) {
          for (int64_t c = 0; c < channels; ++c) {
            const int64_t base = (b * channels + c) * hw;
            for (int64_t i = 0; i < hw; ++i) {
              if (!in_range(c)) {
                gx[base + i] += a.grad_out[base + i];
              } else if (x[base + i] > 0.0f) {
                gx[base + i] += factor * a.grad_out[base + i];
              }
            }
          }
        }
      });
}

}  // namespace saf
