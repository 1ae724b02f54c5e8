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

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "swinsits/swinsits.h"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("swinsits_test_capi_" + name);
  fs::remove_all(p);
  return p;
}

sits_synth_options small_synth(int64_t tiles) {
  sits_synth_options o;
  sits_synth_options_default(&o);
  o.tiles = tiles;
  return o;
}

}  // namespace

TEST(CApi, StatusNamesAndVersion) {
  EXPECT_STRNE(sits_version(), "");
  EXPECT_STREQ(sits_status_name(SITS_OK), "ok");
  for (int s = SITS_ERR_DIMENSION; s <= SITS_ERR_INTERNAL; ++s)
    EXPECT_STRNE(sits_status_name(static_cast<sits_status>(s)), "");
}

TEST(CApi, SynthDefaults) {
  sits_synth_options o;
  sits_synth_options_default(&o);
  EXPECT_EQ(o.tiles, 10);
  EXPECT_EQ(o.classes, 5);
  EXPECT_EQ(o.bands, 4);
  EXPECT_EQ(o.timesteps, 16);
  EXPECT_EQ(o.height, 48);
  EXPECT_EQ(o.width, 48);
  EXPECT_DOUBLE_EQ(o.train_fraction, 0.6);
  EXPECT_DOUBLE_EQ(o.val_fraction, 0.2);
}

TEST(CApi, ModelCreateAndShape) {
  sits_model* m = nullptr;
  ASSERT_EQ(sits_model_create("munich-like", 0, &m), SITS_OK) << sits_last_error();
  int64_t shape[5];
  ASSERT_EQ(sits_model_shape(m, shape), SITS_OK);
  EXPECT_EQ(std::vector<int64_t>(shape, shape + 5), (std::vector<int64_t>{13, 32, 48, 48, 18}));
  int64_t blocks = 0, bottleneck[3];
  ASSERT_EQ(sits_model_encoder_stats(m, &blocks, bottleneck), SITS_OK);
  EXPECT_EQ(blocks, 6);
  EXPECT_EQ(std::vector<int64_t>(bottleneck, bottleneck + 3), (std::vector<int64_t>{2, 3, 3}));
  int64_t count = 0;
  ASSERT_EQ(sits_model_parameter_count(m, &count), SITS_OK);
  EXPECT_GT(count, 0);
  sits_model_free(m);
  sits_model_free(nullptr);
}

TEST(CApi, ErrorsSetLastError) {
  sits_model* m = nullptr;
  EXPECT_EQ(sits_model_create("gigantic", 0, &m), SITS_ERR_CONFIG);
  EXPECT_EQ(m, nullptr);
  EXPECT_NE(std::string(sits_last_error()).find("gigantic"), std::string::npos) << sits_last_error();
  EXPECT_EQ(sits_model_create(nullptr, 0, &m), SITS_ERR_USAGE);
  EXPECT_EQ(sits_model_shape(nullptr, nullptr), SITS_ERR_USAGE);
  std::string before = sits_last_error();
  ASSERT_EQ(sits_model_create("tiny", 0, &m), SITS_OK);
  EXPECT_EQ(before, sits_last_error());
  std::vector<float> in(4 * 16 * 48 * 48), out(10);
  EXPECT_EQ(sits_model_forward(m, in.data(), 1, out.data(), out.size()), SITS_ERR_DIMENSION);
  EXPECT_NE(std::string(sits_last_error()).find("logits"), std::string::npos);
  sits_tile* t = nullptr;
  EXPECT_EQ(sits_tile_load("/nonexistent/tile.sit", &t), SITS_ERR_IO);
  int failed = 0;
  EXPECT_EQ(sits_verify("everything", nullptr, nullptr, &failed), SITS_ERR_USAGE);
  sits_model_free(m);
}

TEST(CApi, SynthRejectsBadTimeSteps) {
  auto o = small_synth(2);
  o.timesteps = 17;
  const auto dir = scratch("t17");
  EXPECT_EQ(sits_synth(&o, dir.c_str()), SITS_ERR_CONFIG);
  EXPECT_NE(std::string(sits_last_error()).find("17"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "splits.txt"));
}

TEST(CApi, TileForwardAndPredict) {
  const auto dir = scratch("tiles");
  auto o = small_synth(2);
  ASSERT_EQ(sits_synth(&o, dir.c_str()), SITS_OK) << sits_last_error();
  sits_tile* t = nullptr;
  ASSERT_EQ(sits_tile_load((dir / "tile_0000.sit").c_str(), &t), SITS_OK) << sits_last_error();
  int64_t dims[5];
  ASSERT_EQ(sits_tile_dims(t, dims), SITS_OK);
  EXPECT_EQ(std::vector<int64_t>(dims, dims + 5), (std::vector<int64_t>{16, 4, 48, 48, 5}));
  std::vector<uint8_t> labels(48 * 48);
  ASSERT_EQ(sits_tile_labels(t, labels.data(), labels.size()), SITS_OK);
  EXPECT_EQ(sits_tile_labels(t, labels.data(), 3), SITS_ERR_DIMENSION);

  sits_model* m = nullptr;
  ASSERT_EQ(sits_model_create("tiny", 5, &m), SITS_OK);
  std::vector<uint8_t> pred(48 * 48);
  ASSERT_EQ(sits_model_predict(m, t, pred.data(), pred.size()), SITS_OK) << sits_last_error();
  for (auto p : pred) ASSERT_LT(p, 5);

  std::vector<float> in(4 * 16 * 48 * 48, 0.25f), logits(5 * 48 * 48);
  ASSERT_EQ(sits_model_forward(m, in.data(), 1, logits.data(), logits.size()), SITS_OK) << sits_last_error();
  for (float v : logits) ASSERT_TRUE(std::isfinite(v));

  const auto ck = dir / "m.ckpt";
  ASSERT_EQ(sits_model_save(m, ck.c_str()), SITS_OK) << sits_last_error();
  sits_model* back = nullptr;
  ASSERT_EQ(sits_model_load(ck.c_str(), &back), SITS_OK) << sits_last_error();
  std::vector<float> again(logits.size());
  ASSERT_EQ(sits_model_forward(back, in.data(), 1, again.data(), again.size()), SITS_OK);
  EXPECT_EQ(std::memcmp(again.data(), logits.data(), logits.size() * sizeof(float)), 0);

  const auto copy = dir / "copy.sit";
  ASSERT_EQ(sits_tile_save(t, copy.c_str()), SITS_OK);
  sits_tile* t2 = nullptr;
  ASSERT_EQ(sits_tile_load(copy.c_str(), &t2), SITS_OK);
  std::vector<uint8_t> labels2(labels.size());
  ASSERT_EQ(sits_tile_labels(t2, labels2.data(), labels2.size()), SITS_OK);
  EXPECT_EQ(labels2, labels);

  sits_tile_free(t2);
  sits_tile_free(t);
  sits_model_free(back);
  sits_model_free(m);
  fs::remove_all(dir);
}
