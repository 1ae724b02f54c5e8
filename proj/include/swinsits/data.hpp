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

// Tile files, dataset index files and the synthetic phenology generator.
//
// .sit layout (little-endian):
//   offset 0   "SIT1"
//   offset 4   u16 T, u16 C, u16 H, u16 W, u16 K, u16 reserved (= 0)
//   offset 16  T*C*H*W f32 values, t-major then c, h, w (w fastest)
//   then       H*W u8 labels, row-major; 255 = ignore

#ifndef SWINSITS_DATA_HPP
#define SWINSITS_DATA_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "swinsits/rng.hpp"

namespace swinsits {

inline constexpr std::uint8_t kIgnoreLabel = 255;
inline constexpr std::size_t kTileHeaderBytes = 16;

struct SitsTile {
  std::int64_t time_steps = 0;
  std::int64_t bands = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::int64_t num_classes = 0;
  std::vector<float> values;         // T*C*H*W
  std::vector<std::uint8_t> labels;  // H*W

  float value(std::int64_t t, std::int64_t c, std::int64_t h, std::int64_t w) const {
    return values[static_cast<std::size_t>(((t * bands + c) * height + h) * width + w)];
  }
  std::uint8_t label(std::int64_t h, std::int64_t w) const {
    return labels[static_cast<std::size_t>(h * width + w)];
  }

  // Extents, payload sizes, finite values, labels in [0, K) or 255.
  void validate() const;
  bool operator==(const SitsTile&) const = default;
};

std::vector<std::uint8_t> encode_tile(const SitsTile& tile);
SitsTile decode_tile(std::span<const std::uint8_t> bytes);
void save_tile(const SitsTile& tile, const std::filesystem::path& path);
SitsTile load_tile(const std::filesystem::path& path);

// Output frame k takes input frame floor(k * T / target).
std::vector<std::int64_t> resample_indices(std::int64_t time_steps, std::int64_t target);
SitsTile temporal_resample(const SitsTile& tile, std::int64_t target);

SitsTile flip_tile(const SitsTile& tile, bool vertical, bool horizontal);

struct FlipDraw {
  bool vertical = false;    // rows: (r, c) -> (H-1-r, c)
  bool horizontal = false;  // columns: (r, c) -> (r, W-1-c)
};

// Vertical then horizontal, each with probability 0.5 (uniform() < 0.5).
FlipDraw draw_flips(SplitMix64& rng);
SitsTile augment_flip(const SitsTile& tile, SplitMix64& rng, FlipDraw* applied = nullptr);

// value = min(raw / 10000, 1)
std::vector<float> normalize_bands(std::span<const std::int32_t> raw);

enum class Split { Train, Val, Test };
const char* to_string(Split split);
Split parse_split(const std::string& text);

struct ClassInfo {
  std::int64_t id = 0;
  std::string name;
  std::array<std::uint8_t, 3> color{0, 0, 0};
};

struct DatasetEntry {
  std::string file;
  Split split = Split::Train;
};

struct DatasetIndex {
  std::filesystem::path root;
  std::vector<DatasetEntry> entries;
  std::vector<ClassInfo> classes;

  std::vector<std::filesystem::path> files(Split split) const;
  std::size_t count(Split split) const;
};

// Reads splits.txt and classes.txt under `dir`; checks every tile header.
DatasetIndex load_index(const std::filesystem::path& dir);
void write_index(const DatasetIndex& index);
std::vector<SitsTile> load_split(const DatasetIndex& index, Split split);

struct SynthOptions {
  std::int64_t num_tiles = 10;
  std::int64_t num_classes = 5;
  std::int64_t time_steps = 16;
  std::int64_t bands = 4;
  std::int64_t height = 48;
  std::int64_t width = 48;
  std::uint64_t seed = 0;
  double train_fraction = 0.6;
  double val_fraction = 0.2;  // test takes the rest

  void validate() const;
};

inline constexpr double kSynthNoise = 0.05;
inline constexpr double kSynthAmplitude = 0.15;

/// Noiseless reflectance of class `k` in band `b` at frame `t` of `T`:
///   m + 0.15 * sin(2*pi*t/T + phi)
/// Classes cycle through four phases (quarter turns) and ceil(K/4) mean
/// levels spread over [0.15, 0.85]; each band rotates the level assignment and
/// adds a common phase offset of b*pi/5. For K <= 20 any two classes differ by
/// at least 0.15 somewhere in every band.
double phenology(std::int64_t k, std::int64_t b, std::int64_t t, std::int64_t T, std::int64_t K);

// [C * T] profile, band-major.
std::vector<double> class_profile(std::int64_t k, std::int64_t bands, std::int64_t T, std::int64_t K);

// Voronoi fields (6-12 centers) with one class each, phenology + N(0, 0.05) noise.
SitsTile synth_tile(const SynthOptions& options, SplitMix64& rng);

// Writes tile_NNNN.sit, splits.txt and classes.txt into `out_dir`.
DatasetIndex synth_dataset(const SynthOptions& options, const std::filesystem::path& out_dir);

}  // namespace swinsits

#endif  // SWINSITS_DATA_HPP
