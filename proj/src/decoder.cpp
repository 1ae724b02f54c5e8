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

#include "swinsits/decoder.hpp"

#include <cmath>

namespace swinsits {

namespace {

InitSpec conv_init(std::int64_t fan_in) {
  return InitSpec::uniform(1.0 / std::sqrt(static_cast<double>(fan_in)));
}

constexpr Triple kOne{1, 1, 1};
constexpr Triple kZero{0, 0, 0};

}  // namespace

template <typename T>
ResidualBlock<T>::ResidualBlock(ParameterSet<T>& params, const std::string& name,
                                std::int64_t in_channels, std::int64_t out_channels, SplitMix64& rng) {
  conv1_ = params.create(name + ".conv1.weight", Shape{out_channels, in_channels, 3, 3, 3},
                         conv_init(in_channels * 27), rng);
  conv2_ = params.create(name + ".conv2.weight", Shape{out_channels, out_channels, 3, 3, 3},
                         conv_init(out_channels * 27), rng);
  proj_ = params.create(name + ".proj.weight", Shape{out_channels, in_channels, 1, 1, 1},
                        conv_init(in_channels), rng);
}

template <typename T>
Tensor<T> ResidualBlock<T>::forward(const Tensor<T>& x) const {
  const Tensor<T> none;
  auto h = conv3d(x, conv1_, none, kOne, kOne);
  h = leaky_relu(instance_norm(h, kInstanceNormEps), kLeakySlope);
  h = instance_norm(conv3d(h, conv2_, none, kOne, kOne), kInstanceNormEps);
  auto r = instance_norm(conv3d(x, proj_, none, kOne, kZero), kInstanceNormEps);
  return leaky_relu(add(h, r), kLeakySlope);
}

template <typename T>
UpConcat<T>::UpConcat(ParameterSet<T>& params, const std::string& name, std::int64_t low_channels,
                      std::int64_t skip_channels, std::int64_t out_channels, SplitMix64& rng) {
  up_ = params.create(name + ".up.weight", Shape{low_channels, out_channels, 2, 2, 2},
                      conv_init(out_channels * 8), rng);
  block_ = ResidualBlock<T>(params, name + ".block", out_channels + skip_channels, out_channels, rng);
}

template <typename T>
Tensor<T> UpConcat<T>::forward(const Tensor<T>& low, const Tensor<T>& skip) const {
  SWINSITS_CHECK(low.rank() == 5 && skip.rank() == 5 && low.dim(0) == skip.dim(0) &&
                     2 * low.dim(2) == skip.dim(2) && 2 * low.dim(3) == skip.dim(3) &&
                     2 * low.dim(4) == skip.dim(4),
                 ErrorKind::Dimension, "up_concat: coarse extents ", shape_str(low.shape()),
                 " must be exactly half of skip ", shape_str(skip.shape()));
  auto up = conv3d_transpose(low, up_, Triple{2, 2, 2});
  return block_.forward(concat(std::vector<Tensor<T>>{up, skip}, 1));
}

template <typename T>
TemporalCollapseHead<T>::TemporalCollapseHead(ParameterSet<T>& params, const std::string& name,
                                              std::int64_t features, std::int64_t time_steps,
                                              std::int64_t classes, SplitMix64& rng) {
  weight_ = params.create(name + ".weight", Shape{classes, features * time_steps, 1, 1, 1},
                          conv_init(features * time_steps), rng);
  bias_ = params.create(name + ".bias", Shape{classes}, InitSpec::zeros(), rng);
}

template <typename T>
Tensor<T> TemporalCollapseHead<T>::forward(const Tensor<T>& x) const {
  SWINSITS_CHECK(x.rank() == 5 && x.dim(1) * x.dim(2) == weight_.dim(1), ErrorKind::Dimension,
                 "temporal head expects [B, F, T, H, W] with F*T = ", weight_.dim(1), ", got ",
                 shape_str(x.shape()));
  const std::int64_t B = x.dim(0), H = x.dim(3), W = x.dim(4);
  auto folded = reshape(x, Shape{B, x.dim(1) * x.dim(2), 1, H, W});
  auto logits = conv3d(folded, weight_, bias_, kOne, kZero);
  return reshape(logits, Shape{B, weight_.dim(0), H, W});
}

template <typename T>
SegmentationModel<T>::SegmentationModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg.validate();
  SplitMix64 rng(seed);
  encoder_ = SwinEncoder<T>(params_, cfg, rng);
  const std::int64_t e = cfg.embed_dim;
  enc_raw_ = ResidualBlock<T>(params_, "decoder.enc_raw", cfg.in_channels, e / 2, rng);
  enc_skip2_ = ResidualBlock<T>(params_, "decoder.enc_skip2", e, e, rng);
  enc_skip4_ = ResidualBlock<T>(params_, "decoder.enc_skip4", 2 * e, 2 * e, rng);
  enc_skip8_ = ResidualBlock<T>(params_, "decoder.enc_skip8", 4 * e, 4 * e, rng);
  up8_ = UpConcat<T>(params_, "decoder.up8", 8 * e, 4 * e, 4 * e, rng);
  up4_ = UpConcat<T>(params_, "decoder.up4", 4 * e, 2 * e, 2 * e, rng);
  up2_ = UpConcat<T>(params_, "decoder.up2", 2 * e, e, e, rng);
  up1_ = UpConcat<T>(params_, "decoder.up1", e, e / 2, e / 2, rng);
  head_ = TemporalCollapseHead<T>(params_, "decoder.head", e / 2, cfg.time_steps, cfg.num_classes, rng);
}

template <typename T>
Tensor<T> SegmentationModel<T>::forward(const Tensor<T>& x, const ForwardContext& ctx) const {
  const auto enc = encoder_.forward(x, ctx);
  auto d = up8_.forward(enc.bottleneck, enc_skip8_.forward(enc.skip8));
  d = up4_.forward(d, enc_skip4_.forward(enc.skip4));
  d = up2_.forward(d, enc_skip2_.forward(enc.skip2));
  d = up1_.forward(d, enc_raw_.forward(x));
  return head_.forward(d);
}

template class ResidualBlock<float>;
template class ResidualBlock<double>;
template class UpConcat<float>;
template class UpConcat<double>;
template class TemporalCollapseHead<float>;
template class TemporalCollapseHead<double>;
template class SegmentationModel<float>;
template class SegmentationModel<double>;

}  // namespace swinsits
