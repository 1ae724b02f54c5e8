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

#include "swinsits/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "byteio.hpp"
#include "swinsits/render.hpp"

namespace swinsits {

namespace fs = std::filesystem;

namespace {

constexpr char kTileMagic[4] = {'S', 'I', 'T', '1'};
constexpr std::int64_t kMaxExtent = 65535;

std::size_t payload_values(std::int64_t T, std::int64_t C, std::int64_t H, std::int64_t W) {
  return static_cast<std::size_t>(T * C * H * W);
}

std::string tile_name(std::int64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "tile_%04lld.sit", static_cast<long long>(i));
  return buf;
}

// Splits on whitespace; returns false for blank lines.
bool split_fields(const std::string& line, std::vector<std::string>& fields) {
  fields.clear();
  std::istringstream is(line);
  std::string f;
  while (is >> f) fields.push_back(f);
  return !fields.empty();
}

std::int64_t parse_int(const std::string& text, const fs::path& file, int line, const char* what) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size())
    detail::raise(ErrorKind::Format, file.string(), ":", line, ": ", what, " '", text,
                  "' is not an integer");
  return v;
}

}  // namespace

void SitsTile::validate() const {
  SWINSITS_CHECK(time_steps >= 1 && bands >= 1 && height >= 1 && width >= 1 &&
                     time_steps <= kMaxExtent && bands <= kMaxExtent && height <= kMaxExtent &&
                     width <= kMaxExtent,
                 ErrorKind::Format, "tile extents T=", time_steps, " C=", bands, " H=", height,
                 " W=", width, " out of range [1, 65535]");
  SWINSITS_CHECK(num_classes >= 1 && num_classes <= 255, ErrorKind::Format, "tile class count ",
                 num_classes, " out of range [1, 255]");
  SWINSITS_CHECK(values.size() == payload_values(time_steps, bands, height, width), ErrorKind::Format,
                 "tile holds ", values.size(), " values, expected T*C*H*W = ",
                 payload_values(time_steps, bands, height, width));
  SWINSITS_CHECK(labels.size() == static_cast<std::size_t>(height * width), ErrorKind::Format,
                 "tile holds ", labels.size(), " labels, expected H*W = ", height * width);
  for (std::size_t i = 0; i < values.size(); ++i)
    SWINSITS_CHECK(std::isfinite(values[i]), ErrorKind::Format, "tile value ", i, " is not finite");
  for (std::size_t i = 0; i < labels.size(); ++i)
    SWINSITS_CHECK(labels[i] < num_classes || labels[i] == kIgnoreLabel, ErrorKind::Format,
                   "tile label ", int{labels[i]}, " at pixel ", i, " outside [0, ", num_classes,
                   ") and not the ignore id");
}

std::vector<std::uint8_t> encode_tile(const SitsTile& tile) {
  tile.validate();
  io::ByteWriter w;
  w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(kTileMagic), 4));
  w.u16(static_cast<std::uint16_t>(tile.time_steps));
  w.u16(static_cast<std::uint16_t>(tile.bands));
  w.u16(static_cast<std::uint16_t>(tile.height));
  w.u16(static_cast<std::uint16_t>(tile.width));
  w.u16(static_cast<std::uint16_t>(tile.num_classes));
  w.u16(0);
  w.f32_array(tile.values);
  w.bytes(tile.labels);
  return std::move(w.buffer());
}

SitsTile decode_tile(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "tile");
  auto magic = r.bytes(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kTileMagic)) r.fail(0, "bad magic, expected \"SIT1\"");
  SitsTile t;
  t.time_steps = r.u16("T");
  t.bands = r.u16("C");
  t.height = r.u16("H");
  t.width = r.u16("W");
  t.num_classes = r.u16("K");
  const std::size_t reserved_at = r.offset();
  if (r.u16("reserved") != 0) r.fail(reserved_at, "reserved header field must be 0");
  if (t.time_steps == 0 || t.bands == 0 || t.height == 0 || t.width == 0)
    r.fail(4, "zero extent in header");
  if (t.num_classes == 0 || t.num_classes > 255) r.fail(12, "class count must be in [1, 255]");
  t.values.resize(payload_values(t.time_steps, t.bands, t.height, t.width));
  r.f32_array(t.values, "values");
  const std::size_t labels_at = r.offset();
  auto labels = r.bytes(static_cast<std::size_t>(t.height * t.width), "labels");
  t.labels.assign(labels.begin(), labels.end());
  for (std::size_t i = 0; i < t.labels.size(); ++i)
    if (t.labels[i] >= t.num_classes && t.labels[i] != kIgnoreLabel)
      r.fail(labels_at + i, "label " + std::to_string(t.labels[i]) + " out of range");
  if (r.remaining() != 0) r.fail(r.offset(), "trailing bytes after labels");
  for (std::size_t i = 0; i < t.values.size(); ++i)
    if (!std::isfinite(t.values[i])) r.fail(kTileHeaderBytes + 4 * i, "non-finite value");
  return t;
}

void save_tile(const SitsTile& tile, const fs::path& path) { io::write_file(path, encode_tile(tile)); }

SitsTile load_tile(const fs::path& path) {
  const auto bytes = io::read_file(path);
  try {
    return decode_tile(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::vector<std::int64_t> resample_indices(std::int64_t time_steps, std::int64_t target) {
  SWINSITS_CHECK(target > 0 && target % 16 == 0, ErrorKind::Config, "temporal_resample: target ",
                 target, " must be a positive multiple of 16");
  SWINSITS_CHECK(time_steps >= 1, ErrorKind::Config, "temporal_resample: tile has no frames");
  std::vector<std::int64_t> idx(static_cast<std::size_t>(target));
  for (std::int64_t k = 0; k < target; ++k) idx[static_cast<std::size_t>(k)] = k * time_steps / target;
  return idx;
}

SitsTile temporal_resample(const SitsTile& tile, std::int64_t target) {
  const auto idx = resample_indices(tile.time_steps, target);
  SitsTile out = tile;
  out.time_steps = target;
  const std::size_t frame = static_cast<std::size_t>(tile.bands * tile.height * tile.width);
  out.values.resize(frame * static_cast<std::size_t>(target));
  for (std::size_t k = 0; k < idx.size(); ++k)
    std::copy_n(tile.values.begin() + static_cast<std::ptrdiff_t>(frame * static_cast<std::size_t>(idx[k])),
                frame, out.values.begin() + static_cast<std::ptrdiff_t>(frame * k));
  return out;
}

SitsTile flip_tile(const SitsTile& tile, bool vertical, bool horizontal) {
  if (!vertical && !horizontal) return tile;
  SitsTile out = tile;
  const std::int64_t H = tile.height, W = tile.width;
  auto src_index = [&](std::int64_t r, std::int64_t c) {
    return (vertical ? H - 1 - r : r) * W + (horizontal ? W - 1 - c : c);
  };
  const std::int64_t planes = tile.time_steps * tile.bands;
  for (std::int64_t p = 0; p < planes; ++p) {
    const float* src = tile.values.data() + p * H * W;
    float* dst = out.values.data() + p * H * W;
    for (std::int64_t r = 0; r < H; ++r)
      for (std::int64_t c = 0; c < W; ++c) dst[r * W + c] = src[src_index(r, c)];
  }
  for (std::int64_t r = 0; r < H; ++r)
    for (std::int64_t c = 0; c < W; ++c)
      out.labels[static_cast<std::size_t>(r * W + c)] = tile.labels[static_cast<std::size_t>(src_index(r, c))];
  return out;
}

FlipDraw draw_flips(SplitMix64& rng) {
  FlipDraw d;
  d.vertical = rng.uniform() < 0.5;
  d.horizontal = rng.uniform() < 0.5;
  return d;
}

SitsTile augment_flip(const SitsTile& tile, SplitMix64& rng, FlipDraw* applied) {
  const FlipDraw d = draw_flips(rng);
  if (applied) *applied = d;
  return flip_tile(tile, d.vertical, d.horizontal);
}

std::vector<float> normalize_bands(std::span<const std::int32_t> raw) {
  std::vector<float> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    SWINSITS_CHECK(raw[i] >= 0, ErrorKind::Range, "normalize_bands: negative reflectance ", raw[i],
                   " at index ", i);
    out[i] = static_cast<float>(std::min(static_cast<double>(raw[i]) / 10000.0, 1.0));
  }
  return out;
}

const char* to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::Train;
  if (text == "val") return Split::Val;
  if (text == "test") return Split::Test;
  detail::raise(ErrorKind::Config, "unknown split '", text, "' (expected train, val or test)");
}

std::vector<fs::path> DatasetIndex::files(Split split) const {
  std::vector<fs::path> out;
  for (const auto& e : entries)
    if (e.split == split) out.push_back(root / e.file);
  return out;
}

std::size_t DatasetIndex::count(Split split) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [&](const DatasetEntry& e) { return e.split == split; }));
}

DatasetIndex load_index(const fs::path& dir) {
  SWINSITS_CHECK(fs::is_directory(dir), ErrorKind::Io, "dataset directory '", dir.string(),
                 "' does not exist");
  DatasetIndex index;
  index.root = dir;
  std::vector<std::string> fields;
  std::string line;

  const fs::path classes_file = dir / "classes.txt";
  std::ifstream classes(classes_file);
  SWINSITS_CHECK(classes.good(), ErrorKind::Io, "cannot open '", classes_file.string(), "'");
  for (int n = 1; std::getline(classes, line); ++n) {
    if (!split_fields(line, fields)) continue;
    if (fields.size() != 5)
      detail::raise(ErrorKind::Format, classes_file.string(), ":", n,
                    ": expected '<id> <name> <r> <g> <b>'");
    ClassInfo c;
    c.id = parse_int(fields[0], classes_file, n, "class id");
    c.name = fields[1];
    for (int k = 0; k < 3; ++k) {
      const auto v = parse_int(fields[2 + k], classes_file, n, "color component");
      if (v < 0 || v > 255)
        detail::raise(ErrorKind::Format, classes_file.string(), ":", n, ": color component ", v,
                      " outside [0, 255]");
      c.color[k] = static_cast<std::uint8_t>(v);
    }
    if (c.id != static_cast<std::int64_t>(index.classes.size()))
      detail::raise(ErrorKind::Format, classes_file.string(), ":", n, ": class id ", c.id,
                    " out of sequence, expected ", index.classes.size());
    index.classes.push_back(std::move(c));
  }
  SWINSITS_CHECK(index.classes.size() >= 2 && index.classes.size() <= 255, ErrorKind::Format,
                 classes_file.string(), ": needs between 2 and 255 classes, found ", index.classes.size());

  const fs::path splits_file = dir / "splits.txt";
  std::ifstream splits(splits_file);
  SWINSITS_CHECK(splits.good(), ErrorKind::Io, "cannot open '", splits_file.string(), "'");
  std::set<std::string> seen;
  for (int n = 1; std::getline(splits, line); ++n) {
    if (!split_fields(line, fields)) continue;
    if (fields.size() != 2)
      detail::raise(ErrorKind::Format, splits_file.string(), ":", n, ": expected '<filename> <split>'");
    DatasetEntry e;
    e.file = fields[0];
    try {
      e.split = parse_split(fields[1]);
    } catch (const Error& err) {
      detail::raise(ErrorKind::Format, splits_file.string(), ":", n, ": ", err.what());
    }
    if (!seen.insert(e.file).second)
      detail::raise(ErrorKind::Format, splits_file.string(), ":", n, ": '", e.file,
                    "' is listed more than once");
    const fs::path p = dir / e.file;
    if (!fs::is_regular_file(p))
      detail::raise(ErrorKind::Io, splits_file.string(), ":", n, ": tile '", p.string(), "' not found");
    // Header plus size check; the payload is parsed when the split is loaded.
    std::ifstream in(p, std::ios::binary);
    std::uint8_t head[kTileHeaderBytes] = {};
    in.read(reinterpret_cast<char*>(head), kTileHeaderBytes);
    io::ByteReader r(std::span<const std::uint8_t>(head, static_cast<std::size_t>(in.gcount())), p.string());
    auto magic = r.bytes(4, "magic");
    if (!std::equal(magic.begin(), magic.end(), kTileMagic)) r.fail(0, "bad magic, expected \"SIT1\"");
    const std::int64_t T = r.u16("T"), C = r.u16("C"), H = r.u16("H"), W = r.u16("W");
    const std::int64_t K = r.u16("K");
    const auto expected = kTileHeaderBytes + 4 * payload_values(T, C, H, W) + static_cast<std::size_t>(H * W);
    if (fs::file_size(p) != expected)
      detail::raise(ErrorKind::Format, p.string(), ": file size ", fs::file_size(p),
                    " does not match header (expected ", expected, ")");
    if (K != static_cast<std::int64_t>(index.classes.size()))
      detail::raise(ErrorKind::Format, p.string(), ": tile declares K=", K, " but classes.txt lists ",
                    index.classes.size(), " classes");
    index.entries.push_back(std::move(e));
  }
  return index;
}

void write_index(const DatasetIndex& index) {
  std::ostringstream splits;
  for (const auto& e : index.entries) splits << e.file << ' ' << to_string(e.split) << '\n';
  std::ostringstream classes;
  for (const auto& c : index.classes)
    classes << c.id << ' ' << c.name << ' ' << int{c.color[0]} << ' ' << int{c.color[1]} << ' '
            << int{c.color[2]} << '\n';
  const auto s = splits.str(), c = classes.str();
  io::write_file(index.root / "splits.txt",
                 std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  io::write_file(index.root / "classes.txt",
                 std::span(reinterpret_cast<const std::uint8_t*>(c.data()), c.size()));
}

std::vector<SitsTile> load_split(const DatasetIndex& index, Split split) {
  std::vector<SitsTile> tiles;
  for (const auto& p : index.files(split)) tiles.push_back(load_tile(p));
  return tiles;
}

void SynthOptions::validate() const {
  SWINSITS_CHECK(num_tiles >= 1, ErrorKind::Config, "synth: need at least one tile, got ", num_tiles);
  SWINSITS_CHECK(num_classes >= 2 && num_classes <= 255, ErrorKind::Config, "synth: classes ",
                 num_classes, " outside [2, 255]");
  SWINSITS_CHECK(time_steps >= 1 && bands >= 1 && height >= 1 && width >= 1 &&
                     time_steps <= kMaxExtent && bands <= kMaxExtent && height <= kMaxExtent &&
                     width <= kMaxExtent,
                 ErrorKind::Config, "synth: extents T=", time_steps, " C=", bands, " H=", height,
                 " W=", width, " outside [1, 65535]");
  SWINSITS_CHECK(train_fraction >= 0 && val_fraction >= 0 && train_fraction + val_fraction <= 1.0 + 1e-12,
                 ErrorKind::Config, "synth: split fractions ", train_fraction, "/", val_fraction,
                 " must be nonnegative with sum <= 1");
}

double phenology(std::int64_t k, std::int64_t b, std::int64_t t, std::int64_t T, std::int64_t K) {
  const std::int64_t levels = (K + 3) / 4;
  const std::int64_t level = (k / 4 + b) % levels;
  const double mean = levels == 1 ? 0.5 : 0.15 + 0.7 * static_cast<double>(level) / static_cast<double>(levels - 1);
  const double phase = static_cast<double>(k % 4) * std::numbers::pi / 2.0 +
                       static_cast<double>(b) * std::numbers::pi / 5.0;
  return mean + kSynthAmplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) /
                                               static_cast<double>(T) + phase);
}

std::vector<double> class_profile(std::int64_t k, std::int64_t bands, std::int64_t T, std::int64_t K) {
  std::vector<double> out(static_cast<std::size_t>(bands * T));
  for (std::int64_t b = 0; b < bands; ++b)
    for (std::int64_t t = 0; t < T; ++t) out[static_cast<std::size_t>(b * T + t)] = phenology(k, b, t, T, K);
  return out;
}

SitsTile synth_tile(const SynthOptions& o, SplitMix64& rng) {
  SitsTile tile;
  tile.time_steps = o.time_steps;
  tile.bands = o.bands;
  tile.height = o.height;
  tile.width = o.width;
  tile.num_classes = o.num_classes;

  const std::int64_t fields = 6 + static_cast<std::int64_t>(rng.below(7));
  std::vector<double> cy(static_cast<std::size_t>(fields)), cx(cy.size());
  std::vector<std::uint8_t> cls(cy.size());
  for (std::size_t f = 0; f < cy.size(); ++f) {
    cy[f] = rng.uniform() * static_cast<double>(o.height);
    cx[f] = rng.uniform() * static_cast<double>(o.width);
    cls[f] = static_cast<std::uint8_t>(rng.below(static_cast<std::uint64_t>(o.num_classes)));
  }
  tile.labels.resize(static_cast<std::size_t>(o.height * o.width));
  for (std::int64_t r = 0; r < o.height; ++r)
    for (std::int64_t c = 0; c < o.width; ++c) {
      std::size_t best = 0;
      double best_d = 0;
      for (std::size_t f = 0; f < cy.size(); ++f) {
        const double dy = static_cast<double>(r) + 0.5 - cy[f];
        const double dx = static_cast<double>(c) + 0.5 - cx[f];
        const double d = dy * dy + dx * dx;
        if (f == 0 || d < best_d) {
          best = f;
          best_d = d;
        }
      }
      tile.labels[static_cast<std::size_t>(r * o.width + c)] = cls[best];
    }

  std::vector<std::vector<double>> profiles(static_cast<std::size_t>(o.num_classes));
  for (std::int64_t k = 0; k < o.num_classes; ++k)
    profiles[static_cast<std::size_t>(k)] = class_profile(k, o.bands, o.time_steps, o.num_classes);

  tile.values.resize(payload_values(o.time_steps, o.bands, o.height, o.width));
  std::size_t i = 0;
  for (std::int64_t t = 0; t < o.time_steps; ++t)
    for (std::int64_t b = 0; b < o.bands; ++b)
      for (std::size_t p = 0; p < tile.labels.size(); ++p, ++i) {
        const double clean = profiles[tile.labels[p]][static_cast<std::size_t>(b * o.time_steps + t)];
        tile.values[i] = static_cast<float>(std::clamp(clean + kSynthNoise * rng.normal(), 0.0, 1.0));
      }
  return tile;
}

DatasetIndex synth_dataset(const SynthOptions& o, const fs::path& out_dir) {
  o.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  SWINSITS_CHECK(!ec && fs::is_directory(out_dir), ErrorKind::Io, "cannot create directory '",
                 out_dir.string(), "'", ec ? ": " + ec.message() : std::string());

  const auto n = o.num_tiles;
  const double test_fraction = std::max(0.0, 1.0 - o.train_fraction - o.val_fraction);
  const auto n_val = static_cast<std::int64_t>(std::floor(static_cast<double>(n) * o.val_fraction + 1e-9));
  const auto n_test = static_cast<std::int64_t>(std::floor(static_cast<double>(n) * test_fraction + 1e-9));
  const auto n_train = n - n_val - n_test;

  DatasetIndex index;
  index.root = out_dir;
  for (std::int64_t k = 0; k < o.num_classes; ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "class_%02lld", static_cast<long long>(k));
    index.classes.push_back(ClassInfo{k, name, default_class_color(k)});
  }
  for (std::int64_t i = 0; i < n; ++i) {
    SplitMix64 rng(mix_seed(o.seed, static_cast<std::uint64_t>(i)));
    const SitsTile tile = synth_tile(o, rng);
    DatasetEntry e;
    e.file = tile_name(i);
    e.split = i < n_train ? Split::Train : (i < n_train + n_val ? Split::Val : Split::Test);
    save_tile(tile, out_dir / e.file);
    index.entries.push_back(std::move(e));
  }
  write_index(index);
  return index;
}

}  // namespace swinsits
