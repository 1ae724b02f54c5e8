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

// Optimizer, schedule, checkpoints and the epoch loop.
//
// Checkpoint layout (little-endian):
//   "SWCK", u32 version, u32 n + n bytes of "key = value" config text,
//   u32 tensor count, then per tensor
//   u16 name length, name bytes, u8 rank, rank x u32 dims, f32 payload.
// Optimizer velocities are stored as extra tensors named "momentum/<param>".

#ifndef SWINSITS_TRAIN_HPP
#define SWINSITS_TRAIN_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "swinsits/data.hpp"
#include "swinsits/decoder.hpp"
#include "swinsits/metrics.hpp"

namespace swinsits {

struct TrainConfig {
  double lr_max = 0.01;
  double lr_min = 0.0;
  double momentum = 0.9;
  std::int64_t epochs = 200;
  std::int64_t batch_size = 2;
  std::uint64_t seed = 0;
  std::int64_t ignore_id = 255;
  bool augment = true;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// lr_min + (lr_max - lr_min) * (1 + cos(pi * step / total)) / 2
double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_max, double lr_min);

// v <- momentum * v + g;  w <- w - lr * v
template <typename T>
void sgd_momentum_step(std::span<T> weights, std::span<const T> grads, std::span<T> velocity, double lr,
                       double momentum);

/// One velocity buffer per parameter. Parameters without a gradient see g = 0.
template <typename T>
class SgdMomentum {
 public:
  SgdMomentum() = default;
  explicit SgdMomentum(const ParameterSet<T>& params);

  void step(ParameterSet<T>& params, double lr, double momentum);

  std::vector<std::vector<T>>& velocity() { return velocity_; }
  const std::vector<std::vector<T>>& velocity() const { return velocity_; }

 private:
  std::vector<std::vector<T>> velocity_;
};

struct StoredTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
  bool operator==(const StoredTensor&) const = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  ModelConfig model;
  TrainConfig train;
  std::int64_t global_step = 0;
  // Running state so that an interrupted epoch resumes with the same log.
  double epoch_loss_sum = 0.0;
  std::int64_t epoch_loss_count = 0;
  double best_val_oa = -1.0;
  std::vector<StoredTensor> parameters;
  std::vector<StoredTensor> velocity;  // same order and shapes as parameters, or empty

  bool operator==(const Checkpoint&) const = default;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint make_checkpoint(const SegmentationModel<float>& model, const TrainConfig& train,
                           const SgdMomentum<float>* optimizer, std::int64_t global_step);
// Copies values by name; shape mismatches raise Dimension naming the tensor.
void load_parameters(SegmentationModel<float>& model, const Checkpoint& ckpt);
void load_velocity(SgdMomentum<float>& optimizer, const SegmentationModel<float>& model,
                   const Checkpoint& ckpt);

// Stacks tiles into [B, C, T, H, W]; labels go to `labels` when non-null.
Tensor<float> tiles_to_input(const std::vector<const SitsTile*>& tiles, std::vector<std::int32_t>* labels);
// Resamples time when needed; band or spatial mismatches raise Dimension.
SitsTile conform_tile(const SitsTile& tile, const ModelConfig& cfg);

std::vector<std::uint8_t> predict_labels(const SegmentationModel<float>& model, const SitsTile& tile);
// Pooled confusion matrix; `threads` > 1 splits tiles across workers.
ConfusionMatrix evaluate(const SegmentationModel<float>& model, const std::vector<SitsTile>& tiles,
                         int threads = 1);

struct FitOptions {
  std::filesystem::path out_dir;  // empty: nothing written
  const Checkpoint* resume = nullptr;
  std::int64_t stop_after_steps = 0;  // 0: run to the end
  bool final_train_eval = true;
  std::function<void(const std::string&)> on_log;
};

struct FitResult {
  std::vector<double> step_losses;  // steps run in this call
  std::vector<std::string> log;
  std::int64_t global_step = 0;
  std::int64_t total_steps = 0;
  double final_train_oa = -1.0;
  double best_val_oa = -1.0;
  Checkpoint last;
};

// Trains `model` in place. Tiles are conformed to the model config first.
FitResult fit(SegmentationModel<float>& model, const std::vector<SitsTile>& train,
              const std::vector<SitsTile>& val, const TrainConfig& cfg, const FitOptions& options = {});

std::int64_t steps_per_epoch(std::int64_t num_tiles, std::int64_t batch_size);
// Seeded Fisher-Yates over [0, n) with seed + epoch.
std::vector<std::int64_t> epoch_order(std::int64_t n, std::uint64_t seed, std::int64_t epoch);

}  // namespace swinsits

#endif  // SWINSITS_TRAIN_HPP
