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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "oracles.hpp"
#include "swinsits/data.hpp"
#include "swinsits/error.hpp"

using namespace swinsits;
namespace fs = std::filesystem;

namespace {

SitsTile random_tile(std::uint64_t seed, std::int64_t T = 3, std::int64_t C = 2, std::int64_t H = 4,
                     std::int64_t W = 5, std::int64_t K = 4) {
  oracle::RefSplitMix g{seed};
  SitsTile t;
  t.time_steps = T;
  t.bands = C;
  t.height = H;
  t.width = W;
  t.num_classes = K;
  for (std::int64_t i = 0; i < T * C * H * W; ++i) t.values.push_back(static_cast<float>(g.uniform()));
  for (std::int64_t i = 0; i < H * W; ++i) {
    const auto r = g.next() % static_cast<std::uint64_t>(K + 1);
    t.labels.push_back(r == static_cast<std::uint64_t>(K) ? kIgnoreLabel : static_cast<std::uint8_t>(r));
  }
  return t;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("swinsits_test_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::uint16_t le16(const std::vector<std::uint8_t>& b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::Unsupported;
}

}  // namespace

TEST(TileFormat, RoundTripHundredTiles) {
  auto dir = scratch("roundtrip");
  oracle::RefSplitMix g{5};
  for (int i = 0; i < 100; ++i) {
    const auto t = random_tile(g.next(), 1 + g.next() % 4, 1 + g.next() % 3, 1 + g.next() % 6, 1 + g.next() % 6,
                               2 + g.next() % 5);
    const auto p = dir / "t.sit";
    save_tile(t, p);
    const auto u = load_tile(p);
    ASSERT_EQ(u, t);
    ASSERT_EQ(std::memcmp(u.values.data(), t.values.data(), t.values.size() * 4), 0);
  }
}

TEST(TileFormat, HeaderLayout) {
  SitsTile t = random_tile(1, 32, 13, 48, 48, 18);
  const auto bytes = encode_tile(t);
  const std::size_t payload = 32 * 13 * 48 * 48 * 4 + 48 * 48;
  ASSERT_EQ(bytes.size(), 16 + payload);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "SIT1");
  EXPECT_EQ(le16(bytes, 4), 32);
  EXPECT_EQ(le16(bytes, 6), 13);
  EXPECT_EQ(le16(bytes, 8), 48);
  EXPECT_EQ(le16(bytes, 10), 48);
  EXPECT_EQ(le16(bytes, 12), 18);
  EXPECT_EQ(le16(bytes, 14), 0);
  float first;
  std::memcpy(&first, bytes.data() + 16, 4);
  EXPECT_EQ(first, t.values[0]);
  EXPECT_EQ(bytes[16 + 32 * 13 * 48 * 48 * 4], t.labels[0]);
}

TEST(TileFormat, RejectsBadInput) {
  auto bytes = encode_tile(random_tile(2));
  auto bad = bytes;
  std::memcpy(bad.data(), "XXXX", 4);
  EXPECT_EQ(kind_of([&] { decode_tile(bad); }), ErrorKind::Format);
  try {
    decode_tile(bad);
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos) << e.what();
  }
  auto cut = std::vector<std::uint8_t>(bytes.begin(), bytes.end() - 3);
  EXPECT_EQ(kind_of([&] { decode_tile(cut); }), ErrorKind::Format);
  auto lab = bytes;
  lab.back() = 7;  // K = 4
  EXPECT_EQ(kind_of([&] { decode_tile(lab); }), ErrorKind::Format);
  auto tile = random_tile(3);
  tile.values[1] = std::nanf("");
  EXPECT_EQ(kind_of([&] { encode_tile(tile); }), ErrorKind::Format);
}

TEST(Resample, IndexFormula) {
  const auto idx = resample_indices(70, 32);
  ASSERT_EQ(idx.size(), 32u);
  for (std::int64_t k = 0; k < 32; ++k) EXPECT_EQ(idx[k], k * 70 / 32);
  EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
  EXPECT_EQ(idx.back(), 67);
  const auto dup = resample_indices(16, 32);
  for (std::int64_t k = 0; k < 32; ++k) EXPECT_EQ(dup[k], k / 2);
}

TEST(Resample, SelectsFramesExactly) {
  const auto t = random_tile(4, 70, 2, 3, 3, 3);
  const auto r = temporal_resample(t, 32);
  ASSERT_EQ(r.time_steps, 32);
  EXPECT_EQ(r.labels, t.labels);
  for (std::int64_t k = 0; k < 32; ++k)
    for (std::int64_t c = 0; c < 2; ++c)
      for (std::int64_t h = 0; h < 3; ++h)
        for (std::int64_t w = 0; w < 3; ++w) ASSERT_EQ(r.value(k, c, h, w), t.value(k * 70 / 32, c, h, w));
  const auto same = random_tile(5, 32, 2, 3, 3, 3);
  EXPECT_EQ(temporal_resample(same, 32), same);
  EXPECT_EQ(kind_of([&] { temporal_resample(same, 20); }), ErrorKind::Config);
}

TEST(Flip, Geometry) {
  const auto t = random_tile(6, 2, 2, 4, 5, 4);
  const auto h = flip_tile(t, false, true);
  const auto v = flip_tile(t, true, false);
  for (std::int64_t r = 0; r < 4; ++r)
    for (std::int64_t c = 0; c < 5; ++c) {
      EXPECT_EQ(h.label(r, 4 - c), t.label(r, c));
      EXPECT_EQ(v.label(3 - r, c), t.label(r, c));
      for (std::int64_t s = 0; s < 2; ++s)
        for (std::int64_t b = 0; b < 2; ++b) {
          EXPECT_EQ(h.value(s, b, r, 4 - c), t.value(s, b, r, c));
          EXPECT_EQ(v.value(s, b, 3 - r, c), t.value(s, b, r, c));
        }
    }
  EXPECT_EQ(flip_tile(h, false, true), t);
  EXPECT_EQ(flip_tile(v, true, false), t);
}

TEST(Flip, SequenceFollowsGenerator) {
  SplitMix64 lib(2024);
  oracle::RefSplitMix ref{2024};
  int v = 0, h = 0;
  for (int i = 0; i < 100; ++i) {
    const auto d = draw_flips(lib);
    const bool ev = ref.uniform() < 0.5, eh = ref.uniform() < 0.5;
    ASSERT_EQ(d.vertical, ev) << i;
    ASSERT_EQ(d.horizontal, eh) << i;
    v += ev;
    h += eh;
  }
  EXPECT_GT(v, 25);
  EXPECT_GT(h, 25);
}

TEST(Flip, AugmentKeepsLabelMultiset) {
  SplitMix64 rng(7);
  const auto t = random_tile(8, 2, 1, 6, 6, 5);
  auto sorted = t.labels;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 20; ++i) {
    FlipDraw d;
    auto a = augment_flip(t, rng, &d);
    EXPECT_EQ(a, flip_tile(t, d.vertical, d.horizontal));
    std::sort(a.labels.begin(), a.labels.end());
    EXPECT_EQ(a.labels, sorted);
  }
}

TEST(Normalize, ScaleAndClamp) {
  const std::vector<std::int32_t> raw{0, 10000, 12000, 2500};
  const auto v = normalize_bands(raw);
  EXPECT_EQ(v, (std::vector<float>{0.0f, 1.0f, 1.0f, 0.25f}));
}

TEST(Splits, ParseNames) {
  EXPECT_EQ(parse_split("train"), Split::Train);
  EXPECT_EQ(parse_split("val"), Split::Val);
  EXPECT_EQ(parse_split("test"), Split::Test);
  EXPECT_EQ(kind_of([] { parse_split("dev"); }), ErrorKind::Config);
}

TEST(Synth, DeterministicFilesAndSplit) {
  SynthOptions o;
  o.seed = 7;
  auto a = scratch("synth_a"), b = scratch("synth_b");
  synth_dataset(o, a);
  synth_dataset(o, b);
  for (const auto& e : fs::directory_iterator(a)) EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename()));
  const auto idx = load_index(a);
  EXPECT_EQ(idx.count(Split::Train), 6u);
  EXPECT_EQ(idx.count(Split::Val), 2u);
  EXPECT_EQ(idx.count(Split::Test), 2u);
  EXPECT_EQ(idx.classes.size(), 5u);
  std::ifstream splits(a / "splits.txt");
  std::string file, split;
  splits >> file >> split;
  EXPECT_EQ(file, "tile_0000.sit");
  EXPECT_EQ(split, "train");
}

TEST(Synth, LabelsAndFields) {
  SynthOptions o;
  o.num_classes = 5;
  for (std::uint64_t s = 0; s < 20; ++s) {
    SplitMix64 rng(s);
    const auto t = synth_tile(o, rng);
    EXPECT_NO_THROW(t.validate());
    for (auto l : t.labels) ASSERT_LT(l, 5);
    for (float v : t.values) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
  }
}

TEST(Synth, CurveTableMatchesDocumentedFormula) {
  for (std::int64_t K : {2, 5, 7, 18, 20})
    for (std::int64_t b = 0; b < 4; ++b)
      for (std::int64_t k = 0; k < K; ++k) {
        const std::int64_t levels = (K + 3) / 4;
        const double mean = levels == 1 ? 0.5 : 0.15 + 0.7 * static_cast<double>((k / 4 + b) % levels) / (levels - 1);
        const double phase = (k % 4) * std::numbers::pi / 2 + b * std::numbers::pi / 5;
        for (std::int64_t t = 0; t < 16; ++t)
          ASSERT_NEAR(phenology(k, b, t, 16, K), mean + 0.15 * std::sin(2 * std::numbers::pi * t / 16 + phase),
                      1e-15);
      }
}

TEST(Synth, ProfilesSeparatedByAtLeastAmplitude) {
  for (std::int64_t K : {2, 5, 7, 18, 20}) {
    const std::int64_t C = 4, T = 16;
    std::vector<std::vector<double>> prof;
    for (std::int64_t k = 0; k < K; ++k) prof.push_back(class_profile(k, C, T, K));
    for (std::int64_t i = 0; i < K; ++i)
      for (std::int64_t j = i + 1; j < K; ++j)
        for (std::int64_t b = 0; b < C; ++b) {
          double linf = 0;
          for (std::int64_t t = 0; t < T; ++t)
            linf = std::max(linf, std::abs(prof[i][b * T + t] - prof[j][b * T + t]));
          EXPECT_GE(linf, 0.15 - 1e-12) << "K=" << K << " classes " << i << "," << j << " band " << b;
        }
  }
}

TEST(Synth, NearestProfileRecoversClass) {
  SynthOptions o;
  o.num_classes = 7;
  SplitMix64 rng(3);
  const auto t = synth_tile(o, rng);
  std::vector<std::vector<double>> prof;
  for (std::int64_t k = 0; k < 7; ++k) prof.push_back(class_profile(k, o.bands, o.time_steps, 7));
  // Noiseless lookup: each class's own curve is its nearest profile.
  for (std::int64_t k = 0; k < 7; ++k) {
    std::int64_t best = -1;
    double bd = 1e300;
    for (std::int64_t j = 0; j < 7; ++j) {
      double d = 0;
      for (std::size_t i = 0; i < prof[k].size(); ++i) d += std::pow(prof[k][i] - prof[j][i], 2);
      if (d < bd) bd = d, best = j;
    }
    EXPECT_EQ(best, k);
  }
  // Empirical class means over the tile sit close to the noiseless curves.
  for (std::int64_t k = 0; k < 7; ++k) {
    std::vector<double> m(prof[k].size(), 0.0);
    std::int64_t n = 0;
    for (std::int64_t r = 0; r < t.height; ++r)
      for (std::int64_t c = 0; c < t.width; ++c) {
        if (t.label(r, c) != k) continue;
        ++n;
        for (std::int64_t b = 0; b < t.bands; ++b)
          for (std::int64_t s = 0; s < t.time_steps; ++s) m[b * t.time_steps + s] += t.value(s, b, r, c);
      }
    if (n < 100) continue;
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_NEAR(m[i] / n, prof[k][i], 0.03);
  }
}

TEST(Index, MissingDirectoryAndTile) {
  EXPECT_EQ(kind_of([] { load_index("/nonexistent/swinsits"); }), ErrorKind::Io);
  SynthOptions o;
  o.num_tiles = 3;
  auto d = scratch("index_missing");
  synth_dataset(o, d);
  fs::remove(d / "tile_0001.sit");
  EXPECT_EQ(kind_of([&] { load_index(d); }), ErrorKind::Io);
}

TEST(Index, WriteThenLoad) {
  auto d = scratch("index_write");
  save_tile(random_tile(9, 2, 1, 3, 3, 3), d / "a.sit");
  save_tile(random_tile(10, 2, 1, 3, 3, 3), d / "b.sit");
  DatasetIndex idx;
  idx.root = d;
  idx.entries = {{"a.sit", Split::Val}, {"b.sit", Split::Train}};
  idx.classes = {{0, "wheat", {1, 2, 3}}, {1, "maize", {4, 5, 6}}, {2, "rye", {7, 8, 9}}};
  write_index(idx);
  const auto back = load_index(d);
  ASSERT_EQ(back.entries.size(), 2u);
  EXPECT_EQ(back.files(Split::Val), (std::vector<fs::path>{d / "a.sit"}));
  EXPECT_EQ(back.classes[1].name, "maize");
  EXPECT_EQ(back.classes[2].color, (std::array<std::uint8_t, 3>{7, 8, 9}));
  EXPECT_EQ(load_split(back, Split::Train).front(), load_tile(d / "b.sit"));
}
