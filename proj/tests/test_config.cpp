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

#include <filesystem>
#include <fstream>

#include "swinsits/config.hpp"
#include "swinsits/error.hpp"

using namespace swinsits;

namespace {

std::string config_error(const std::string& text) {
  try {
    parse_run_config(text, "run.cfg");
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
    return e.what();
  }
  ADD_FAILURE() << "accepted: " << text;
  return {};
}

}  // namespace

TEST(Tokenize, CommentsAndBlankLines) {
  const auto lines = tokenize_config("# header\n\n  epochs = 4   # trailing\nseed=9\n", "x");
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0].key, "epochs");
  EXPECT_EQ(lines[0].value, "4");
  EXPECT_EQ(lines[0].line, 3);
  EXPECT_EQ(lines[1].key, "seed");
  EXPECT_EQ(lines[1].line, 4);
}

TEST(Tokenize, MalformedLinesCarryLineNumbers) {
  EXPECT_NE(config_error("seed = 1\nnot a pair\n").find("run.cfg:2:"), std::string::npos);
  EXPECT_NE(config_error("= 3\n").find("run.cfg:1:"), std::string::npos);
  EXPECT_NE(config_error("\n\nepochs =\n").find("run.cfg:3:"), std::string::npos);
  const auto repeat = config_error("seed = 1\nepochs = 2\nseed = 3\n");
  EXPECT_NE(repeat.find("run.cfg:3:"), std::string::npos);
  EXPECT_NE(repeat.find("seed"), std::string::npos);
}

TEST(Parse, UnknownKeyNamesKeyAndLine) {
  const auto msg = config_error("preset = tiny\nlearning_rate = 0.1\n");
  EXPECT_NE(msg.find("learning_rate"), std::string::npos);
  EXPECT_NE(msg.find("run.cfg:2:"), std::string::npos);
}

TEST(Parse, BadValuesNameKeyAndLine) {
  for (const std::string text :
       {"epochs = ten\n", "momentum = 0.9x\n", "augment = maybe\n", "window = 2,3\n", "seed = -1\n"}) {
    const auto msg = config_error(text);
    EXPECT_NE(msg.find("run.cfg:1:"), std::string::npos) << msg;
    EXPECT_NE(msg.find(text.substr(0, text.find(' '))), std::string::npos) << msg;
  }
  EXPECT_NE(config_error("preset = huge\n").find("preset"), std::string::npos);
}

TEST(Parse, InvalidCombinationsRejected) {
  config_error("preset = tiny\nnum_heads = 5,5,5\n");
  config_error("preset = tiny\ntime_steps = 17\n");
  config_error("epochs = 0\n");
  config_error("batch_size = 0\n");
  config_error("momentum = 1.5\n");
  config_error("ignore_id = 3\n");
}

TEST(Parse, Defaults) {
  const auto c = parse_run_config("");
  EXPECT_EQ(c.preset, "munich-like");
  EXPECT_EQ(c.model, ModelConfig::munich_like());
  EXPECT_EQ(c.train.momentum, 0.9);
  EXPECT_EQ(c.train.batch_size, 2);
  EXPECT_EQ(c.train.epochs, 200);
  EXPECT_EQ(c.train.lr_max, 0.01);
  EXPECT_TRUE(c.train.augment);
  EXPECT_EQ(c.train.ignore_id, 255);
  const auto text = format_run_config(c);
  EXPECT_NE(text.find("momentum = 0.9\n"), std::string::npos);
  EXPECT_NE(text.find("batch_size = 2\n"), std::string::npos);
  EXPECT_NE(text.find("epochs = 200\n"), std::string::npos);
}

TEST(Parse, PresetAppliedBeforeOtherKeys) {
  const auto c = parse_run_config("embed_dim = 24\npreset = tiny\n");
  EXPECT_EQ(c.preset, "tiny");
  EXPECT_EQ(c.model.embed_dim, 24);
  EXPECT_EQ(c.model.in_channels, ModelConfig::tiny().in_channels);
  const auto l = parse_run_config("preset = lombardia-like\n");
  EXPECT_EQ(l.model, ModelConfig::lombardia_like());
  EXPECT_EQ(l.model.num_classes, 7);
}

TEST(Format, RoundTrip) {
  auto c = parse_run_config(
      "preset = tiny\nlr_max = 0.0123456789\nlr_min = 1e-05\nseed = 18446744073709551615\n"
      "augment = false\nepochs = 3\nbatch_size = 4\nwindow = 2,2,2\nheight = 16\nwidth = 16\n"
      "data_dir = /tmp/a b\nout_dir = runs/x\n");
  EXPECT_EQ(c.data_dir, "/tmp/a b");
  const auto again = parse_run_config(format_run_config(c));
  EXPECT_EQ(again.model, c.model);
  EXPECT_EQ(again.train, c.train);
  EXPECT_EQ(again.preset, c.preset);
  EXPECT_EQ(again.data_dir, c.data_dir);
  EXPECT_EQ(again.out_dir, c.out_dir);
  EXPECT_EQ(format_run_config(again), format_run_config(c));
  EXPECT_EQ(format_run_config(c, false).find("data_dir"), std::string::npos);
}

TEST(Load, FileAndMissingFile) {
  const auto p = std::filesystem::temp_directory_path() / "swinsits_test_config.cfg";
  {
    std::ofstream out(p);
    out << "preset = tiny\nbogus = 1\n";
  }
  try {
    load_run_config(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(p.string() + ":2:"), std::string::npos) << e.what();
  }
  std::filesystem::remove(p);
  try {
    load_run_config(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
}
