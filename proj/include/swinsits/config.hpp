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

// Run configuration files: one `key = value` per line, `#` starts a comment.
// A `preset` line is applied before every other key regardless of position.

#ifndef SWINSITS_CONFIG_HPP
#define SWINSITS_CONFIG_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "swinsits/swin.hpp"
#include "swinsits/train.hpp"

namespace swinsits {

struct RunConfig {
  std::string preset = "munich-like";
  ModelConfig model;
  TrainConfig train;
  std::filesystem::path data_dir;
  std::filesystem::path out_dir;

  void validate() const;
};

// "munich-like", "lombardia-like" or "tiny".
ModelConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

struct ConfigLine {
  std::string key;
  std::string value;
  int line = 0;
};

// Splits text into entries; malformed lines and repeated keys raise Config
// errors prefixed with "<source>:<line>:".
std::vector<ConfigLine> tokenize_config(const std::string& text, const std::string& source);
// Unknown keys and bad values raise Config errors naming key and line.
void apply_config_key(RunConfig& cfg, const ConfigLine& entry, const std::string& source);

RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

// Canonical text; parse_run_config(format_run_config(c)) reproduces c.
std::string format_run_config(const RunConfig& cfg, bool include_paths = true);

}  // namespace swinsits

#endif  // SWINSITS_CONFIG_HPP
