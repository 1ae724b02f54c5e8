/*
 * Copyright 2026 The swinsits Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Three-stage spatiotemporal shifted-window encoder.
//
// Feature maps inside the encoder are channels-last [B, D, H, W, C] where D is
// the time axis. The encoder input and its outputs are channels-first
// [B, C, D, H, W] to line up with the convolutional decoder.

#ifndef SWINSITS_SWIN_HPP
#define SWINSITS_SWIN_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "swinsits/parameters.hpp"
#include "swinsits/tensor.hpp"

namespace swinsits {

struct ModelConfig {
  std::int64_t in_channels = 13;
  std::int64_t num_classes = 18;
  std::int64_t time_steps = 32;
  std::int64_t height = 48;
  std::int64_t width = 48;
  Triple patch_size{2, 2, 2};
  std::int64_t embed_dim = 48;
  std::vector<std::int64_t> depths{2, 2, 2};
  std::vector<std::int64_t> num_heads{3, 6, 12};
  Triple window{2, 3, 3};
  std::int64_t mlp_ratio = 4;
  double attn_drop = 0.0;
  double proj_drop = 0.0;

  // Throws ErrorKind::Config naming the first violated constraint.
  void validate() const;

  // Feature extents (D, H, W) seen by the blocks of `stage` (0-based).
  Triple stage_extents(int stage) const;
  std::int64_t stage_channels(int stage) const { return embed_dim << stage; }

  static ModelConfig munich_like();
  static ModelConfig lombardia_like();
  static ModelConfig tiny();

  bool operator==(const ModelConfig&) const = default;
};

struct WindowSpec {
  Triple window{2, 3, 3};
  Triple shift{1, 1, 1};

  // shift = floor(window / 2).
  static WindowSpec shifted(Triple window);
  static WindowSpec unshifted(Triple window);
  // Drops the shift along axes where one window spans the whole extent.
  WindowSpec clamped_to(Triple extents) const;
  std::int64_t tokens() const { return window[0] * window[1] * window[2]; }
  bool has_shift() const { return shift[0] != 0 || shift[1] != 0 || shift[2] != 0; }
};

// [B, D, H, W, C] -> [B * nW, wd, wh, ww, C]; windows in d-major, h, w order.
template <typename T> Tensor<T> window_partition(const Tensor<T>& x, const WindowSpec& w);
// Inverse of window_partition; dims = (B, D, H, W).
template <typename T>
Tensor<T> window_reverse(const Tensor<T>& windows, const WindowSpec& w,
                         std::array<std::int64_t, 4> dims);
// direction +1 rolls by -shift, direction -1 undoes it.
template <typename T> Tensor<T> cyclic_shift(const Tensor<T>& x, Triple shift, int direction);

// [nW, t, t] additive mask for the rolled volume: 0 within a region, -1e9 across.
template <typename T> Tensor<T> attention_mask(Triple dims, const WindowSpec& w);

inline constexpr double kMaskValue = -1e9;

struct RelativePositionIndex {
  std::int64_t tokens = 0;
  std::int64_t table_size = 0;
  std::vector<std::int64_t> index;  // tokens * tokens, row-major [i, j]
};

RelativePositionIndex relative_position_index(Triple window);

struct ForwardContext {
  bool training = false;
  SplitMix64* rng = nullptr;  // needed only when training with dropout
};

template <typename T>
struct Linear {
  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out] or undefined

  Linear() = default;
  Linear(ParameterSet<T>& params, const std::string& name, std::int64_t in, std::int64_t out,
         bool with_bias, SplitMix64& rng);
  Tensor<T> operator()(const Tensor<T>& x) const { return linear(x, weight, bias); }
};

template <typename T>
struct LayerNormParams {
  Tensor<T> gamma;
  Tensor<T> beta;

  LayerNormParams() = default;
  LayerNormParams(ParameterSet<T>& params, const std::string& name, std::int64_t dim,
                  SplitMix64& rng);
  Tensor<T> operator()(const Tensor<T>& x) const { return layer_norm(x, gamma, beta, 1e-5); }
};

/// Multi-head self-attention within windows, with a learned relative position
/// bias table of shape [table_size, heads].
template <typename T>
class WindowAttention {
 public:
  WindowAttention() = default;
  WindowAttention(ParameterSet<T>& params, const std::string& name, std::int64_t dim,
                  std::int64_t heads, Triple window, double attn_drop, double proj_drop,
                  SplitMix64& rng);

  // tokens [nW, t, C]; mask [nWm, t, t] repeated over nW / nWm samples, or undefined.
  Tensor<T> forward(const Tensor<T>& tokens, const Tensor<T>& mask, const ForwardContext& ctx) const;

  std::int64_t heads() const { return heads_; }
  const RelativePositionIndex& relative_index() const { return rel_; }
  const Linear<T>& q() const { return q_; }
  const Linear<T>& k() const { return k_; }
  const Linear<T>& v() const { return v_; }
  const Linear<T>& proj() const { return proj_; }
  const Tensor<T>& bias_table() const { return bias_table_; }
  // [heads, t, t] bias gathered from the table.
  Tensor<T> position_bias() const;

 private:
  std::int64_t dim_ = 0;
  std::int64_t heads_ = 1;
  double attn_drop_ = 0.0;
  double proj_drop_ = 0.0;
  RelativePositionIndex rel_;
  Linear<T> q_, k_, v_, proj_;
  Tensor<T> bias_table_;
};

/// Pre-norm transformer block: x + attn(LN(x)), then + MLP(LN(.)). The shifted
/// variant rolls the volume before partitioning and masks wrapped regions.
template <typename T>
class SwinBlock {
 public:
  SwinBlock() = default;
  SwinBlock(ParameterSet<T>& params, const std::string& name, std::int64_t dim, std::int64_t heads,
            Triple window, bool shifted, std::int64_t mlp_ratio, double attn_drop, double proj_drop,
            SplitMix64& rng);

  // x [B, D, H, W, C]
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx) const;

  bool shifted() const { return shifted_; }
  const WindowAttention<T>& attention() const { return attn_; }
  const LayerNormParams<T>& norm1() const { return norm1_; }

 private:
  Triple window_{};
  bool shifted_ = false;
  double proj_drop_ = 0.0;
  LayerNormParams<T> norm1_, norm2_;
  WindowAttention<T> attn_;
  Linear<T> fc1_, fc2_;
};

/// 2x2x2 cell concatenation (8C), layer norm, projection to 2C.
template <typename T>
class PatchMerging {
 public:
  PatchMerging() = default;
  PatchMerging(ParameterSet<T>& params, const std::string& name, std::int64_t dim, SplitMix64& rng);

  Tensor<T> forward(const Tensor<T>& x) const;

 private:
  LayerNormParams<T> norm_;
  Linear<T> reduction_;
};

// Concatenates the 8 voxels of each 2x2x2 cell: [B,D,H,W,C] -> [B,D/2,H/2,W/2,8C].
template <typename T> Tensor<T> merge_cells(const Tensor<T>& x);

template <typename T>
struct EncoderOutput {
  Tensor<T> skip2;       // [B, E, T/2, H/2, W/2]
  Tensor<T> skip4;       // [B, 2E, T/4, H/4, W/4]
  Tensor<T> skip8;       // [B, 4E, T/8, H/8, W/8]
  Tensor<T> bottleneck;  // [B, 8E, T/16, H/16, W/16]
  int blocks_executed = 0;
};

template <typename T>
class SwinEncoder {
 public:
  SwinEncoder() = default;
  SwinEncoder(ParameterSet<T>& params, const ModelConfig& cfg, SplitMix64& rng);

  // Strided conv embedding, returned channels-first [B, E, T/2, H/2, W/2].
  Tensor<T> patch_embed(const Tensor<T>& x) const;
  EncoderOutput<T> forward(const Tensor<T>& x, const ForwardContext& ctx) const;

  const std::vector<std::vector<SwinBlock<T>>>& stages() const { return stages_; }

 private:
  ModelConfig cfg_;
  Tensor<T> embed_weight_;
  Tensor<T> embed_bias_;
  std::vector<std::vector<SwinBlock<T>>> stages_;
  std::vector<PatchMerging<T>> merges_;
};

// Channels-last <-> channels-first for 5-D feature maps.
template <typename T> Tensor<T> to_channels_last(const Tensor<T>& x);
template <typename T> Tensor<T> to_channels_first(const Tensor<T>& x);

}  // namespace swinsits

#endif  // SWINSITS_SWIN_HPP
