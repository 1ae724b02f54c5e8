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

#ifndef SWINSITS_DECODER_HPP
#define SWINSITS_DECODER_HPP

#include <string>

#include "swinsits/parameters.hpp"
#include "swinsits/swin.hpp"

namespace swinsits {

inline constexpr double kLeakySlope = 0.01;
inline constexpr double kInstanceNormEps = 1e-5;

/// act(IN(conv3(act(IN(conv3(x)))))  +  IN(conv1(x))), act = leaky ReLU.
/// Convolutions carry no bias since each is followed by instance norm.
template <typename T>
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(ParameterSet<T>& params, const std::string& name, std::int64_t in_channels,
                std::int64_t out_channels, SplitMix64& rng);

  Tensor<T> forward(const Tensor<T>& x) const;

  const Tensor<T>& conv1() const { return conv1_; }
  const Tensor<T>& conv2() const { return conv2_; }
  const Tensor<T>& projection() const { return proj_; }

 private:
  Tensor<T> conv1_, conv2_, proj_;
};

/// Transposed-conv x2 upsampling of the coarse path, channel concat with the
/// skip, then a residual block back to the upsampled width.
template <typename T>
class UpConcat {
 public:
  UpConcat() = default;
  UpConcat(ParameterSet<T>& params, const std::string& name, std::int64_t low_channels,
           std::int64_t skip_channels, std::int64_t out_channels, SplitMix64& rng);

  Tensor<T> forward(const Tensor<T>& low, const Tensor<T>& skip) const;

 private:
  Tensor<T> up_;
  ResidualBlock<T> block_;
};

/// Folds time into channels ([B, F, T, H, W] -> [B, F*T, H, W]) and applies a
/// pointwise projection to class logits.
template <typename T>
class TemporalCollapseHead {
 public:
  TemporalCollapseHead() = default;
  TemporalCollapseHead(ParameterSet<T>& params, const std::string& name, std::int64_t features,
                       std::int64_t time_steps, std::int64_t classes, SplitMix64& rng);

  Tensor<T> forward(const Tensor<T>& x) const;

  const Tensor<T>& weight() const { return weight_; }
  const Tensor<T>& bias() const { return bias_; }

 private:
  Tensor<T> weight_, bias_;
};

/// Encoder + decoder. Input [B, C, T, H, W], output logits [B, K, H, W].
template <typename T>
class SegmentationModel {
 public:
  explicit SegmentationModel(const ModelConfig& cfg, std::uint64_t seed = 0);

  SegmentationModel(const SegmentationModel&) = delete;
  SegmentationModel& operator=(const SegmentationModel&) = delete;
  SegmentationModel(SegmentationModel&&) = default;

  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx = {}) const;
  EncoderOutput<T> encode(const Tensor<T>& x, const ForwardContext& ctx = {}) const {
    return encoder_.forward(x, ctx);
  }

  const ModelConfig& config() const { return cfg_; }
  ParameterSet<T>& parameters() { return params_; }
  const ParameterSet<T>& parameters() const { return params_; }
  const SwinEncoder<T>& encoder() const { return encoder_; }

  // Copies values by name from a model of any precision with the same config.
  template <typename U>
  void copy_values_from(const SegmentationModel<U>& other);

 private:
  ModelConfig cfg_;
  ParameterSet<T> params_;
  SwinEncoder<T> encoder_;
  ResidualBlock<T> enc_raw_, enc_skip2_, enc_skip4_, enc_skip8_;
  UpConcat<T> up8_, up4_, up2_, up1_;
  TemporalCollapseHead<T> head_;
};

template <typename T>
template <typename U>
void SegmentationModel<T>::copy_values_from(const SegmentationModel<U>& other) {
  SWINSITS_CHECK(other.config() == cfg_, ErrorKind::Config, "copy_values_from: config mismatch");
  for (auto& mine : params_.items()) {
    auto theirs = other.parameters().find(mine.name);
    SWINSITS_CHECK(theirs.defined() && theirs.shape() == mine.tensor.shape(), ErrorKind::Dimension,
                   "copy_values_from: tensor '", mine.name, "' missing or mismatched");
    auto dst = mine.tensor.mutable_values();
    auto src = theirs.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(src[i]);
  }
}

}  // namespace swinsits

#endif  // SWINSITS_DECODER_HPP
