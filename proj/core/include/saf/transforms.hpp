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

// Input transformations with three synchronized actions.
//
// A TransformInstance holds one draw of concrete parameters. The same
// parameters drive its action on the image (differentiable, via the tape),
// on a category mask (nearest neighbour, fill = ignore label) and on a box
// set (corner remapping, with boxes split across shuffled blocks). Every
// spatial kind keeps the (H, W) frame; regions with no source pixel are
// filled with 0 in the image and 255 in the mask.
//
// Coordinates are continuous pixel coordinates: pixel (i, j) covers
// [j, j + 1) x [i, i + 1) and its centre is (j + 0.5, i + 0.5). Rotation
// and scaling act about the frame centre (W / 2, H / 2). A positive rotation
// angle turns content counter-clockwise as displayed (y axis pointing down).

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "saf/autodiff.hpp"
#include "saf/rng.hpp"
#include "saf/scenes.hpp"
#include "saf/tensor.hpp"

namespace saf {

enum class TransformKind {
  kIdentity,
  kBlockShuffle,
  kRotate,
  kScaleResize,
  kTranslate,
  kHFlip,
  kPadCropResize,
  kAddNoise,
};

std::string_view kind_name(TransformKind kind);
TransformKind kind_from_name(std::string_view name);
/// True for kinds that move pixel positions (everything except identity and
/// add_noise).
bool is_spatial_kind(TransformKind kind);

struct IdentityParams {
  friend bool operator==(const IdentityParams&, const IdentityParams&) = default;
};
/// The frame is cut into grid x grid blocks of floor(H/grid) x floor(W/grid)
/// pixels; output block i shows source block permutation[i]. Remainder rows
/// and columns beyond the block lattice stay in place.
struct BlockShuffleParams {
  int grid = 1;
  std::vector<int> permutation{0};
  friend bool operator==(const BlockShuffleParams&, const BlockShuffleParams&) = default;
};
struct RotateParams {
  double degrees = 0;
  friend bool operator==(const RotateParams&, const RotateParams&) = default;
};
/// Content scaled by `factor` about the frame centre.
struct ScaleParams {
  double factor = 1;
  friend bool operator==(const ScaleParams&, const ScaleParams&) = default;
};
/// Integer shift; content moves by (dx, dy).
struct TranslateParams {
  int dx = 0;
  int dy = 0;
  friend bool operator==(const TranslateParams&, const TranslateParams&) = default;
};
struct HFlipParams {
  friend bool operator==(const HFlipParams&, const HFlipParams&) = default;
};
/// Content resized by `factor` and placed at an offset expressed as a
/// fraction of the slack (1 - factor) * side; factor > 1 crops instead.
struct PadCropResizeParams {
  double factor = 1;
  double offset_x = 0;
  double offset_y = 0;
  friend bool operator==(const PadCropResizeParams&, const PadCropResizeParams&) = default;
};
/// Additive uniform noise in [-amplitude, amplitude], drawn from `seed`.
struct NoiseParams {
  double amplitude = 0;
  uint64_t seed = 0;
  friend bool operator==(const NoiseParams&, const NoiseParams&) = default;
};

using TransformParams = std::variant<IdentityParams, BlockShuffleParams, RotateParams, ScaleParams,
                                     TranslateParams, HFlipParams, PadCropResizeParams, NoiseParams>;

class TransformInstance {
 public:
  TransformInstance() = default;
  explicit TransformInstance(TransformParams params) : params_(std::move(params)) {}

  TransformKind kind() const;
  bool is_spatial() const { return is_spatial_kind(kind()); }
  const TransformParams& params() const { return params_; }
  template <typename P>
  const P& as() const {
    return std::get<P>(params_);
  }

  /// Throws ParameterError when the parameters cannot act on an H x W frame.
  void check_frame(int64_t height, int64_t width) const;

  std::string describe() const;

  friend bool operator==(const TransformInstance&, const TransformInstance&) = default;

 private:
  TransformParams params_;
};

/// Parameter ranges for one stage; only the fields of `kind` are used.
struct TransformDistribution {
  TransformKind kind = TransformKind::kIdentity;
  int min_grid = 1, max_grid = 1;          // block_shuffle
  double max_degrees = 0;                  // rotate: uniform in [-max, max]
  double min_scale = 1, max_scale = 1;     // scale_resize, pad_crop_resize
  int max_shift = 0;                       // translate: per axis
  double probability = 1;                  // hflip
  double amplitude = 0;                    // add_noise

  TransformInstance sample(Rng& rng) const;
  friend bool operator==(const TransformDistribution&, const TransformDistribution&) = default;
};

struct TransformPipeline {
  std::string name;
  std::vector<TransformDistribution> stages;
  friend bool operator==(const TransformPipeline&, const TransformPipeline&) = default;
};

/// One instance per stage, in stage order.
std::vector<TransformInstance> sample(const TransformPipeline& pipeline, Rng& rng);

/// The ordered subsequence of spatial instances.
std::vector<TransformInstance> spatial_part(std::span<const TransformInstance> instances);

/// Named pipelines built from the primitives. magnitude in [0, 1] scales
/// the ranges: block grid up to 3x3, rotation up to 24 degrees, resize in
/// [0.8, 1.2] at magnitude 1; dem_like uses one third of those ranges.
/// Names: dem_like, sia_like, bsr_like, ic_like. Non-spatial stages come
/// first.
TransformPipeline preset_pipeline(std::string_view name, double magnitude);
std::vector<std::string> preset_names();

std::string serialize_pipeline(const TransformPipeline& pipeline);
TransformPipeline parse_pipeline(std::string_view json_text);

// ---------------------------------------------------------------------------
// Actions.

/// Differentiable action on x (B, C, H, W). Output has the same shape.
Var apply_image(const TransformInstance& instance, Var x);
Var apply_image_chain(std::span<const TransformInstance> instances, Var x);
/// Value-only convenience; builds a scratch tape.
Tensor apply_image(const TransformInstance& instance, const Tensor& x);
Tensor apply_image_chain(std::span<const TransformInstance> instances, const Tensor& x);

/// Nearest-neighbour action; exposed positions become 255. Non-spatial
/// kinds return the mask unchanged.
LabelMap apply_mask(const TransformInstance& instance, const LabelMap& mask);
LabelMap apply_mask_chain(std::span<const TransformInstance> instances, const LabelMap& mask);

inline constexpr double kDefaultMinBoxArea = 4.0;

/// Corner remapping clipped to the frame. block_shuffle splits each box
/// along block boundaries into one piece per source block it overlaps.
/// Results with area below min_area (or zero) are dropped.
BoxSet apply_boxes(const TransformInstance& instance, const BoxSet& boxes, int64_t height,
                   int64_t width, double min_area = kDefaultMinBoxArea);
BoxSet apply_boxes_chain(std::span<const TransformInstance> instances, const BoxSet& boxes,
                         int64_t height, int64_t width, double min_area = kDefaultMinBoxArea);

/// For kinds with an exact pixel mapping (block_shuffle, hflip, translate,
/// identity, add_noise): source index per output pixel, -1 where exposed.
/// For interpolating kinds: throws ParameterError.
std::vector<int32_t> exact_index_map(const TransformInstance& instance, int64_t height,
                                     int64_t width);
bool has_exact_pixel_map(TransformKind kind);

/// Continuous source point for an output point (inverse mapping).
std::array<double, 2> source_point(const TransformInstance& instance, double x, double y,
                                   int64_t height, int64_t width);
/// Continuous destination point for a source point (forward mapping).
std::array<double, 2> destination_point(const TransformInstance& instance, double x, double y,
                                        int64_t height, int64_t width);

}  // namespace saf
