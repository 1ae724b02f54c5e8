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

#include "swinsits/swin.hpp"

#include <cmath>
#include <numeric>

namespace swinsits {

// ---------------------------------------------------------------------------
// ModelConfig

void ModelConfig::validate() const {
  auto fail = [](const auto&... args) { detail::raise(ErrorKind::Config, args...); };
  if (in_channels < 1 || in_channels > 65535) fail("in_channels must be in [1, 65535], got ", in_channels);
  if (num_classes < 2 || num_classes > 255) fail("num_classes must be in [2, 255], got ", num_classes);
  if (time_steps <= 0 || time_steps % 16 != 0)
    fail("time_steps must be a positive multiple of 16, got ", time_steps);
  if (height <= 0 || height % 16 != 0) fail("height must be a positive multiple of 16, got ", height);
  if (width <= 0 || width % 16 != 0) fail("width must be a positive multiple of 16, got ", width);
  if (patch_size != Triple{2, 2, 2})
    fail("patch_size must be 2 2 2 (three merges to a /16 bottleneck)");
  if (embed_dim < 2 || embed_dim % 2 != 0) fail("embed_dim must be even and >= 2, got ", embed_dim);
  if (depths.size() != 3) fail("depths must list exactly 3 stages, got ", depths.size());
  if (num_heads.size() != 3) fail("num_heads must list exactly 3 stages, got ", num_heads.size());
  std::int64_t blocks = 0;
  for (auto d : depths) {
    if (d < 0) fail("depths must be non-negative");
    blocks += d;
  }
  if (blocks != 6) fail("depths must sum to 6 transformer blocks, got ", blocks);
  for (int s = 0; s < 3; ++s) {
    const auto h = num_heads[static_cast<std::size_t>(s)];
    if (h < 1 || stage_channels(s) % h != 0)
      fail("stage ", s, " width ", stage_channels(s), " is not divisible by ", h, " heads");
  }
  for (int i = 0; i < 3; ++i)
    if (window[i] < 1) fail("window extents must be >= 1");
  for (int s = 0; s < 3; ++s) {
    const auto e = stage_extents(s);
    for (int i = 0; i < 3; ++i)
      if (e[i] % window[i] != 0)
        fail("window ", window[0], "x", window[1], "x", window[2], " does not divide stage ", s,
             " extents ", e[0], "x", e[1], "x", e[2]);
  }
  if (mlp_ratio < 1) fail("mlp_ratio must be >= 1, got ", mlp_ratio);
  if (!(attn_drop >= 0.0 && attn_drop < 1.0)) fail("attn_drop must be in [0, 1)");
  if (!(proj_drop >= 0.0 && proj_drop < 1.0)) fail("proj_drop must be in [0, 1)");
}

Triple ModelConfig::stage_extents(int stage) const {
  const std::int64_t f = std::int64_t{2} << stage;
  return {time_steps / f, height / f, width / f};
}

ModelConfig ModelConfig::munich_like() { return ModelConfig{}; }

ModelConfig ModelConfig::lombardia_like() {
  ModelConfig c;
  c.in_channels = 7;
  c.num_classes = 7;
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.in_channels = 4;
  c.num_classes = 5;
  c.time_steps = 16;
  c.embed_dim = 12;
  c.num_heads = {2, 2, 4};
  return c;
}

// ---------------------------------------------------------------------------
// Windows

WindowSpec WindowSpec::shifted(Triple window) {
  return {window, {window[0] / 2, window[1] / 2, window[2] / 2}};
}

WindowSpec WindowSpec::unshifted(Triple window) { return {window, {0, 0, 0}}; }

WindowSpec WindowSpec::clamped_to(Triple extents) const {
  WindowSpec out = *this;
  for (int i = 0; i < 3; ++i)
    if (window[i] >= extents[i]) out.shift[i] = 0;
  return out;
}

namespace {

void check_divides(const Shape& s, const WindowSpec& w, const char* op) {
  SWINSITS_CHECK(s.size() == 5, ErrorKind::Dimension, op, " expects [B,D,H,W,C], got ", shape_str(s));
  for (int i = 0; i < 3; ++i)
    SWINSITS_CHECK(w.window[i] >= 1 && s[static_cast<std::size_t>(1 + i)] % w.window[i] == 0,
                   ErrorKind::Dimension, op, ": window ", w.window[0], "x", w.window[1], "x",
                   w.window[2], " does not divide ", shape_str(s));
}

}  // namespace

template <typename T>
Tensor<T> window_partition(const Tensor<T>& x, const WindowSpec& w) {
  check_divides(x.shape(), w, "window_partition");
  const auto& s = x.shape();
  const auto [wd, wh, ww] = w.window;
  const std::int64_t nd = s[1] / wd, nh = s[2] / wh, nw = s[3] / ww;
  auto v = reshape(x, Shape{s[0], nd, wd, nh, wh, nw, ww, s[4]});
  v = permute(v, {0, 1, 3, 5, 2, 4, 6, 7});
  return reshape(v, Shape{s[0] * nd * nh * nw, wd, wh, ww, s[4]});
}

template <typename T>
Tensor<T> window_reverse(const Tensor<T>& windows, const WindowSpec& w,
                         std::array<std::int64_t, 4> dims) {
  const auto [B, D, H, W] = dims;
  const auto [wd, wh, ww] = w.window;
  SWINSITS_CHECK(windows.rank() == 5 && windows.dim(1) == wd && windows.dim(2) == wh &&
                     windows.dim(3) == ww,
                 ErrorKind::Dimension, "window_reverse: windows ", shape_str(windows.shape()),
                 " do not match window ", wd, "x", wh, "x", ww);
  SWINSITS_CHECK(D % wd == 0 && H % wh == 0 && W % ww == 0, ErrorKind::Dimension,
                 "window_reverse: window does not divide volume ", D, "x", H, "x", W);
  const std::int64_t nd = D / wd, nh = H / wh, nw = W / ww;
  SWINSITS_CHECK(windows.dim(0) == B * nd * nh * nw, ErrorKind::Dimension, "window_reverse: ",
                 windows.dim(0), " windows inconsistent with ", B, "x", D, "x", H, "x", W);
  const std::int64_t C = windows.dim(4);
  auto v = reshape(windows, Shape{B, nd, nh, nw, wd, wh, ww, C});
  v = permute(v, {0, 1, 4, 2, 5, 3, 6, 7});
  return reshape(v, Shape{B, D, H, W, C});
}

template <typename T>
Tensor<T> cyclic_shift(const Tensor<T>& x, Triple shift, int direction) {
  SWINSITS_CHECK(direction == 1 || direction == -1, ErrorKind::Parameter,
                 "cyclic_shift direction must be +1 or -1, got ", direction);
  const std::int64_t sign = direction == 1 ? -1 : 1;
  return roll3(x, Triple{sign * shift[0], sign * shift[1], sign * shift[2]});
}

template <typename T>
Tensor<T> attention_mask(Triple dims, const WindowSpec& w) {
  for (int i = 0; i < 3; ++i)
    SWINSITS_CHECK(w.window[i] >= 1 && dims[i] % w.window[i] == 0, ErrorKind::Dimension,
                   "attention_mask: window does not divide ", dims[0], "x", dims[1], "x", dims[2]);
  const std::int64_t t = w.tokens();
  const std::int64_t nd = dims[0] / w.window[0], nh = dims[1] / w.window[1], nw = dims[2] / w.window[2];
  const std::int64_t n_win = nd * nh * nw;
  Tensor<T> mask(Shape{n_win, t, t});
  if (!w.has_shift()) return mask;

  // Slices [0, n-w), [n-w, n-s), [n-s, n) along each axis of the rolled volume.
  auto region = [&](int axis, std::int64_t i) -> std::int64_t {
    if (i < dims[axis] - w.window[axis]) return 0;
    if (i < dims[axis] - w.shift[axis]) return 1;
    return 2;
  };
  auto m = mask.mutable_values();
  std::vector<std::int64_t> ids(static_cast<std::size_t>(t));
  std::int64_t win = 0;
  for (std::int64_t a = 0; a < nd; ++a)
    for (std::int64_t b = 0; b < nh; ++b)
      for (std::int64_t c = 0; c < nw; ++c, ++win) {
        std::size_t k = 0;
        for (std::int64_t i = 0; i < w.window[0]; ++i)
          for (std::int64_t j = 0; j < w.window[1]; ++j)
            for (std::int64_t l = 0; l < w.window[2]; ++l)
              ids[k++] = region(0, a * w.window[0] + i) * 9 + region(1, b * w.window[1] + j) * 3 +
                         region(2, c * w.window[2] + l);
        for (std::int64_t p = 0; p < t; ++p)
          for (std::int64_t q = 0; q < t; ++q)
            if (ids[static_cast<std::size_t>(p)] != ids[static_cast<std::size_t>(q)])
              m[static_cast<std::size_t>((win * t + p) * t + q)] = static_cast<T>(kMaskValue);
      }
  return mask;
}

RelativePositionIndex relative_position_index(Triple window) {
  const auto [wd, wh, ww] = window;
  RelativePositionIndex r;
  r.tokens = wd * wh * ww;
  r.table_size = (2 * wd - 1) * (2 * wh - 1) * (2 * ww - 1);
  std::vector<Triple> coords;
  coords.reserve(static_cast<std::size_t>(r.tokens));
  for (std::int64_t d = 0; d < wd; ++d)
    for (std::int64_t h = 0; h < wh; ++h)
      for (std::int64_t w = 0; w < ww; ++w) coords.push_back({d, h, w});
  r.index.resize(static_cast<std::size_t>(r.tokens * r.tokens));
  for (std::size_t i = 0; i < coords.size(); ++i)
    for (std::size_t j = 0; j < coords.size(); ++j) {
      const std::int64_t dd = coords[i][0] - coords[j][0] + wd - 1;
      const std::int64_t dh = coords[i][1] - coords[j][1] + wh - 1;
      const std::int64_t dw = coords[i][2] - coords[j][2] + ww - 1;
      r.index[i * coords.size() + j] = (dd * (2 * wh - 1) + dh) * (2 * ww - 1) + dw;
    }
  return r;
}

// ---------------------------------------------------------------------------
// Layers

template <typename T>
Linear<T>::Linear(ParameterSet<T>& params, const std::string& name, std::int64_t in,
                  std::int64_t out, bool with_bias, SplitMix64& rng) {
  weight = params.create(name + ".weight", Shape{in, out}, InitSpec::trunc_normal(), rng);
  if (with_bias) bias = params.create(name + ".bias", Shape{out}, InitSpec::zeros(), rng);
}

template <typename T>
LayerNormParams<T>::LayerNormParams(ParameterSet<T>& params, const std::string& name,
                                    std::int64_t dim, SplitMix64& rng) {
  gamma = params.create(name + ".gamma", Shape{dim}, InitSpec::ones(), rng);
  beta = params.create(name + ".beta", Shape{dim}, InitSpec::zeros(), rng);
}

template <typename T>
WindowAttention<T>::WindowAttention(ParameterSet<T>& params, const std::string& name,
                                    std::int64_t dim, std::int64_t heads, Triple window,
                                    double attn_drop, double proj_drop, SplitMix64& rng)
    : dim_(dim), heads_(heads), attn_drop_(attn_drop), proj_drop_(proj_drop) {
  SWINSITS_CHECK(heads >= 1 && dim % heads == 0, ErrorKind::Config, "window attention width ", dim,
                 " is not divisible by ", heads, " heads");
  rel_ = relative_position_index(window);
  bias_table_ = params.create(name + ".relative_bias", Shape{rel_.table_size, heads},
                              InitSpec::trunc_normal(), rng);
  q_ = Linear<T>(params, name + ".q", dim, dim, true, rng);
  k_ = Linear<T>(params, name + ".k", dim, dim, true, rng);
  v_ = Linear<T>(params, name + ".v", dim, dim, true, rng);
  proj_ = Linear<T>(params, name + ".proj", dim, dim, true, rng);
}

template <typename T>
Tensor<T> WindowAttention<T>::position_bias() const {
  const std::int64_t t = rel_.tokens;
  auto b = gather_rows(bias_table_, rel_.index);  // [t*t, heads]
  return reshape(transpose_last2(b), Shape{heads_, t, t});
}

template <typename T>
Tensor<T> WindowAttention<T>::forward(const Tensor<T>& tokens, const Tensor<T>& mask,
                                      const ForwardContext& ctx) const {
  SWINSITS_CHECK(tokens.rank() == 3 && tokens.dim(1) == rel_.tokens && tokens.dim(2) == dim_,
                 ErrorKind::Dimension, "window attention expects [nW, ", rel_.tokens, ", ", dim_,
                 "], got ", shape_str(tokens.shape()));
  const std::int64_t n = tokens.dim(0), t = rel_.tokens, hd = dim_ / heads_;
  auto split_heads = [&](const Tensor<T>& z) {
    return permute(reshape(z, Shape{n, t, heads_, hd}), {0, 2, 1, 3});
  };
  const auto q = scale(split_heads(q_(tokens)), static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd))));
  const auto k = split_heads(k_(tokens));
  const auto v = split_heads(v_(tokens));

  auto scores = add_suffix(matmul(q, transpose_last2(k)), position_bias());  // [n, heads, t, t]
  if (mask.defined()) {
    SWINSITS_CHECK(mask.rank() == 3 && mask.dim(1) == t && mask.dim(2) == t && n % mask.dim(0) == 0,
                   ErrorKind::Dimension, "window attention mask ", shape_str(mask.shape()),
                   " incompatible with ", n, " windows of ", t, " tokens");
    const std::int64_t nwm = mask.dim(0);
    // Repeat the per-window mask over heads; it is constant, so no gradient.
    Tensor<T> expanded(Shape{nwm, heads_, t, t});
    auto ev = expanded.mutable_values();
    const auto mv = mask.values();
    for (std::int64_t w = 0; w < nwm; ++w)
      for (std::int64_t h = 0; h < heads_; ++h)
        std::copy_n(mv.begin() + w * t * t, t * t, ev.begin() + (w * heads_ + h) * t * t);
    scores = reshape(add_suffix(reshape(scores, Shape{n / nwm, nwm, heads_, t, t}), expanded),
                     Shape{n, heads_, t, t});
  }
  auto attn = softmax_last(scores);
  if (ctx.training && attn_drop_ > 0.0) attn = dropout(attn, attn_drop_, *ctx.rng);
  auto out = permute(matmul(attn, v), {0, 2, 1, 3});  // [n, t, heads, hd]
  out = proj_(reshape(out, Shape{n, t, dim_}));
  if (ctx.training && proj_drop_ > 0.0) out = dropout(out, proj_drop_, *ctx.rng);
  return out;
}

template <typename T>
SwinBlock<T>::SwinBlock(ParameterSet<T>& params, const std::string& name, std::int64_t dim,
                        std::int64_t heads, Triple window, bool shifted, std::int64_t mlp_ratio,
                        double attn_drop, double proj_drop, SplitMix64& rng)
    : window_(window), shifted_(shifted), proj_drop_(proj_drop) {
  norm1_ = LayerNormParams<T>(params, name + ".norm1", dim, rng);
  attn_ = WindowAttention<T>(params, name + ".attn", dim, heads, window, attn_drop, proj_drop, rng);
  norm2_ = LayerNormParams<T>(params, name + ".norm2", dim, rng);
  fc1_ = Linear<T>(params, name + ".mlp.fc1", dim, dim * mlp_ratio, true, rng);
  fc2_ = Linear<T>(params, name + ".mlp.fc2", dim * mlp_ratio, dim, true, rng);
}

template <typename T>
Tensor<T> SwinBlock<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) const {
  SWINSITS_CHECK(x.rank() == 5, ErrorKind::Dimension, "swin block expects [B,D,H,W,C], got ",
                 shape_str(x.shape()));
  const std::int64_t B = x.dim(0), D = x.dim(1), H = x.dim(2), W = x.dim(3), C = x.dim(4);
  const WindowSpec spec = shifted_ ? WindowSpec::shifted(window_).clamped_to({D, H, W})
                                   : WindowSpec::unshifted(window_);
  auto h = norm1_(x);
  if (spec.has_shift()) h = cyclic_shift(h, spec.shift, 1);
  auto wins = window_partition(h, spec);
  wins = reshape(wins, Shape{wins.dim(0), spec.tokens(), C});
  const Tensor<T> mask = spec.has_shift() ? attention_mask<T>({D, H, W}, spec) : Tensor<T>();
  auto a = attn_.forward(wins, mask, ctx);
  a = window_reverse(reshape(a, Shape{a.dim(0), spec.window[0], spec.window[1], spec.window[2], C}),
                     spec, {B, D, H, W});
  if (spec.has_shift()) a = cyclic_shift(a, spec.shift, -1);
  auto y = add(x, a);
  auto m = fc2_(gelu(fc1_(norm2_(y))));
  if (ctx.training && proj_drop_ > 0.0) m = dropout(m, proj_drop_, *ctx.rng);
  return add(y, m);
}

template <typename T>
Tensor<T> merge_cells(const Tensor<T>& x) {
  SWINSITS_CHECK(x.rank() == 5, ErrorKind::Dimension, "patch merging expects [B,D,H,W,C], got ",
                 shape_str(x.shape()));
  const auto& s = x.shape();
  SWINSITS_CHECK(s[1] % 2 == 0 && s[2] % 2 == 0 && s[3] % 2 == 0, ErrorKind::Dimension,
                 "patch merging needs even extents, got ", shape_str(s));
  auto v = reshape(x, Shape{s[0], s[1] / 2, 2, s[2] / 2, 2, s[3] / 2, 2, s[4]});
  v = permute(v, {0, 1, 3, 5, 2, 4, 6, 7});
  return reshape(v, Shape{s[0], s[1] / 2, s[2] / 2, s[3] / 2, 8 * s[4]});
}

template <typename T>
PatchMerging<T>::PatchMerging(ParameterSet<T>& params, const std::string& name, std::int64_t dim,
                              SplitMix64& rng) {
  norm_ = LayerNormParams<T>(params, name + ".norm", 8 * dim, rng);
  reduction_ = Linear<T>(params, name + ".reduction", 8 * dim, 2 * dim, false, rng);
}

template <typename T>
Tensor<T> PatchMerging<T>::forward(const Tensor<T>& x) const {
  return reduction_(norm_(merge_cells(x)));
}

template <typename T>
Tensor<T> to_channels_last(const Tensor<T>& x) {
  return permute(x, {0, 2, 3, 4, 1});
}

template <typename T>
Tensor<T> to_channels_first(const Tensor<T>& x) {
  return permute(x, {0, 4, 1, 2, 3});
}

// ---------------------------------------------------------------------------
// Encoder

template <typename T>
SwinEncoder<T>::SwinEncoder(ParameterSet<T>& params, const ModelConfig& cfg, SplitMix64& rng)
    : cfg_(cfg) {
  cfg.validate();
  const auto& p = cfg.patch_size;
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.in_channels * p[0] * p[1] * p[2]));
  embed_weight_ = params.create("encoder.patch_embed.weight",
                                Shape{cfg.embed_dim, cfg.in_channels, p[0], p[1], p[2]},
                                InitSpec::uniform(bound), rng);
  embed_bias_ = params.create("encoder.patch_embed.bias", Shape{cfg.embed_dim}, InitSpec::zeros(), rng);
  for (int s = 0; s < 3; ++s) {
    const std::string stage = "encoder.stages." + std::to_string(s);
    const std::int64_t dim = cfg.stage_channels(s);
    std::vector<SwinBlock<T>> blocks;
    for (std::int64_t b = 0; b < cfg.depths[static_cast<std::size_t>(s)]; ++b)
      blocks.emplace_back(params, stage + ".blocks." + std::to_string(b), dim,
                          cfg.num_heads[static_cast<std::size_t>(s)], cfg.window, b % 2 == 1,
                          cfg.mlp_ratio, cfg.attn_drop, cfg.proj_drop, rng);
    stages_.push_back(std::move(blocks));
    merges_.emplace_back(params, stage + ".merge", dim, rng);
  }
}

template <typename T>
Tensor<T> SwinEncoder<T>::patch_embed(const Tensor<T>& x) const {
  SWINSITS_CHECK(x.rank() == 5, ErrorKind::Dimension, "patch_embed expects [B,C,T,H,W], got ",
                 shape_str(x.shape()));
  for (int i = 0; i < 3; ++i)
    SWINSITS_CHECK(x.dim(2 + i) % cfg_.patch_size[i] == 0, ErrorKind::Dimension,
                   "patch_embed: extents ", shape_str(x.shape()), " not divisible by patch size");
  return conv3d(x, embed_weight_, embed_bias_, cfg_.patch_size, Triple{0, 0, 0});
}

template <typename T>
EncoderOutput<T> SwinEncoder<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) const {
  SWINSITS_CHECK(x.rank() == 5 && x.dim(1) == cfg_.in_channels && x.dim(2) == cfg_.time_steps &&
                     x.dim(3) == cfg_.height && x.dim(4) == cfg_.width,
                 ErrorKind::Dimension, "encoder input ", shape_str(x.shape()), " does not match (B,",
                 cfg_.in_channels, ",", cfg_.time_steps, ",", cfg_.height, ",", cfg_.width, ")");
  auto hidden = [](const Tensor<T>& cl) {
    return to_channels_first(layer_norm(cl, Tensor<T>(), Tensor<T>(), 1e-5));
  };
  EncoderOutput<T> out;
  auto h = to_channels_last(patch_embed(x));
  out.skip2 = hidden(h);
  std::array<Tensor<T>*, 3> targets{&out.skip4, &out.skip8, &out.bottleneck};
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    for (const auto& block : stages_[s]) {
      h = block.forward(h, ctx);
      ++out.blocks_executed;
    }
    h = merges_[s].forward(h);
    *targets[s] = hidden(h);
  }
  return out;
}

#define SWINSITS_INSTANTIATE(T)                                                            \
  template Tensor<T> window_partition(const Tensor<T>&, const WindowSpec&);                \
  template Tensor<T> window_reverse(const Tensor<T>&, const WindowSpec&,                   \
                                    std::array<std::int64_t, 4>);                          \
  template Tensor<T> cyclic_shift(const Tensor<T>&, Triple, int);                          \
  template Tensor<T> attention_mask<T>(Triple, const WindowSpec&);                         \
  template Tensor<T> merge_cells(const Tensor<T>&);                                        \
  template Tensor<T> to_channels_last(const Tensor<T>&);                                   \
  template Tensor<T> to_channels_first(const Tensor<T>&);                                  \
  template struct Linear<T>;                                                               \
  template struct LayerNormParams<T>;                                                      \
  template class WindowAttention<T>;                                                       \
  template class SwinBlock<T>;                                                             \
  template class PatchMerging<T>;                                                          \
  template class SwinEncoder<T>;

SWINSITS_INSTANTIATE(float)
SWINSITS_INSTANTIATE(double)

#undef SWINSITS_INSTANTIATE

}  // namespace swinsits
