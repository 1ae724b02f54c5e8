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

#include "swinsits/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace swinsits {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct Where {
  const std::string& source;
  const ConfigLine& entry;
};

[[noreturn]] void bad_value(const Where& w, const std::string& expected) {
  detail::raise(ErrorKind::Config, w.source, ":", w.entry.line, ": key '", w.entry.key, "': value '",
                w.entry.value, "' is not ", expected);
}

std::int64_t as_int(const Where& w) {
  std::int64_t v = 0;
  const auto& s = w.entry.value;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) bad_value(w, "an integer");
  return v;
}

std::uint64_t as_uint(const Where& w) {
  std::uint64_t v = 0;
  const auto& s = w.entry.value;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) bad_value(w, "an unsigned integer");
  return v;
}

double as_real(const Where& w) {
  double v = 0;
  const auto& s = w.entry.value;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) bad_value(w, "a number");
  return v;
}

bool as_bool(const Where& w) {
  if (w.entry.value == "true" || w.entry.value == "1") return true;
  if (w.entry.value == "false" || w.entry.value == "0") return false;
  bad_value(w, "true or false");
}

std::vector<std::int64_t> as_list(const Where& w) {
  std::vector<std::int64_t> out;
  std::stringstream ss(w.entry.value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || p != item.data() + item.size())
      bad_value(w, "a comma-separated integer list");
    out.push_back(v);
  }
  if (out.empty()) bad_value(w, "a comma-separated integer list");
  return out;
}

Triple as_triple(const Where& w) {
  auto v = as_list(w);
  if (v.size() != 3) bad_value(w, "three comma-separated integers");
  return {v[0], v[1], v[2]};
}

std::string join(const std::vector<std::int64_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

// Shortest text that parses back to the same double.
std::string real(double v) {
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace

ModelConfig preset_config(const std::string& name) {
  if (name == "munich-like") return ModelConfig::munich_like();
  if (name == "lombardia-like") return ModelConfig::lombardia_like();
  if (name == "tiny") return ModelConfig::tiny();
  detail::raise(ErrorKind::Config, "unknown preset '", name, "' (expected munich-like, lombardia-like or tiny)");
}

std::vector<std::string> preset_names() { return {"munich-like", "lombardia-like", "tiny"}; }

void RunConfig::validate() const {
  model.validate();
  train.validate();
  SWINSITS_CHECK(train.ignore_id < 0 || train.ignore_id >= model.num_classes, ErrorKind::Config,
                 "ignore_id ", train.ignore_id, " collides with a class id below num_classes = ",
                 model.num_classes);
}

std::vector<ConfigLine> tokenize_config(const std::string& text, const std::string& source) {
  std::vector<ConfigLine> out;
  std::map<std::string, int> first_seen;
  std::istringstream in(text);
  std::string raw;
  for (int n = 1; std::getline(in, raw); ++n) {
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      detail::raise(ErrorKind::Config, source, ":", n, ": expected 'key = value', got '", line, "'");
    ConfigLine e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), n};
    if (e.key.empty()) detail::raise(ErrorKind::Config, source, ":", n, ": missing key before '='");
    if (e.value.empty())
      detail::raise(ErrorKind::Config, source, ":", n, ": key '", e.key, "' has no value");
    auto [it, fresh] = first_seen.emplace(e.key, n);
    if (!fresh)
      detail::raise(ErrorKind::Config, source, ":", n, ": key '", e.key, "' repeats line ", it->second);
    out.push_back(std::move(e));
  }
  return out;
}

void apply_config_key(RunConfig& cfg, const ConfigLine& e, const std::string& source) {
  const Where w{source, e};
  auto& m = cfg.model;
  auto& t = cfg.train;
  const auto& k = e.key;
  if (k == "preset") {
    try {
      m = preset_config(e.value);
    } catch (const Error&) {
      bad_value(w, "a known preset (munich-like, lombardia-like, tiny)");
    }
    cfg.preset = e.value;
  } else if (k == "in_channels") m.in_channels = as_int(w);
  else if (k == "num_classes") m.num_classes = as_int(w);
  else if (k == "time_steps") m.time_steps = as_int(w);
  else if (k == "height") m.height = as_int(w);
  else if (k == "width") m.width = as_int(w);
  else if (k == "patch_size") m.patch_size = as_triple(w);
  else if (k == "embed_dim") m.embed_dim = as_int(w);
  else if (k == "depths") m.depths = as_list(w);
  else if (k == "num_heads") m.num_heads = as_list(w);
  else if (k == "window") m.window = as_triple(w);
  else if (k == "mlp_ratio") m.mlp_ratio = as_int(w);
  else if (k == "attn_drop") m.attn_drop = as_real(w);
  else if (k == "proj_drop") m.proj_drop = as_real(w);
  else if (k == "lr_max") t.lr_max = as_real(w);
  else if (k == "lr_min") t.lr_min = as_real(w);
  else if (k == "momentum") t.momentum = as_real(w);
  else if (k == "epochs") t.epochs = as_int(w);
  else if (k == "batch_size") t.batch_size = as_int(w);
  else if (k == "seed") t.seed = as_uint(w);
  else if (k == "ignore_id") t.ignore_id = as_int(w);
  else if (k == "augment") t.augment = as_bool(w);
  else if (k == "data_dir") cfg.data_dir = e.value;
  else if (k == "out_dir") cfg.out_dir = e.value;
  else
    detail::raise(ErrorKind::Config, source, ":", e.line, ": unknown key '", k, "'");
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  const auto entries = tokenize_config(text, source);
  RunConfig cfg;
  for (const auto& e : entries)
    if (e.key == "preset") apply_config_key(cfg, e, source);
  for (const auto& e : entries)
    if (e.key != "preset") apply_config_key(cfg, e, source);
  try {
    cfg.validate();
  } catch (const Error& err) {
    detail::raise(ErrorKind::Config, source, ": ", err.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  SWINSITS_CHECK(in.good(), ErrorKind::Io, "cannot open config file '", path.string(), "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.string());
}

std::string format_run_config(const RunConfig& cfg, bool include_paths) {
  const auto& m = cfg.model;
  const auto& t = cfg.train;
  std::ostringstream os;
  os << "preset = " << cfg.preset << '\n'
     << "in_channels = " << m.in_channels << '\n'
     << "num_classes = " << m.num_classes << '\n'
     << "time_steps = " << m.time_steps << '\n'
     << "height = " << m.height << '\n'
     << "width = " << m.width << '\n'
     << "patch_size = " << join({m.patch_size.begin(), m.patch_size.end()}) << '\n'
     << "embed_dim = " << m.embed_dim << '\n'
     << "depths = " << join(m.depths) << '\n'
     << "num_heads = " << join(m.num_heads) << '\n'
     << "window = " << join({m.window.begin(), m.window.end()}) << '\n'
     << "mlp_ratio = " << m.mlp_ratio << '\n'
     << "attn_drop = " << real(m.attn_drop) << '\n'
     << "proj_drop = " << real(m.proj_drop) << '\n'
     << "lr_max = " << real(t.lr_max) << '\n'
     << "lr_min = " << real(t.lr_min) << '\n'
     << "momentum = " << real(t.momentum) << '\n'
     << "epochs = " << t.epochs << '\n'
     << "batch_size = " << t.batch_size << '\n'
     << "seed = " << t.seed << '\n'
     << "ignore_id = " << t.ignore_id << '\n'
     << "augment = " << (t.augment ? "true" : "false") << '\n';
  if (include_paths) {
    if (!cfg.data_dir.empty()) os << "data_dir = " << cfg.data_dir.string() << '\n';
    if (!cfg.out_dir.empty()) os << "out_dir = " << cfg.out_dir.string() << '\n';
  }
  return os.str();
}

}  // namespace swinsits
