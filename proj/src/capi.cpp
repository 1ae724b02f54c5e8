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

#include "swinsits/swinsits.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "swinsits/config.hpp"
#include "swinsits/data.hpp"
#include "swinsits/decoder.hpp"
#include "swinsits/metrics.hpp"
#include "swinsits/render.hpp"
#include "swinsits/train.hpp"
#include "swinsits/verify.hpp"

struct sits_model {
  std::unique_ptr<swinsits::SegmentationModel<float>> model;
  swinsits::TrainConfig train;
};

struct sits_tile {
  swinsits::SitsTile tile;
};

namespace {

using namespace swinsits;
namespace fs = std::filesystem;

thread_local std::string g_last_error;

sits_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return SITS_ERR_DIMENSION;
    case ErrorKind::Parameter: return SITS_ERR_PARAMETER;
    case ErrorKind::Config: return SITS_ERR_CONFIG;
    case ErrorKind::Format: return SITS_ERR_FORMAT;
    case ErrorKind::Range: return SITS_ERR_RANGE;
    case ErrorKind::Degenerate: return SITS_ERR_DEGENERATE;
    case ErrorKind::Graph: return SITS_ERR_GRAPH;
    case ErrorKind::Io: return SITS_ERR_IO;
    case ErrorKind::Palette: return SITS_ERR_PALETTE;
    case ErrorKind::Unsupported: return SITS_ERR_UNSUPPORTED;
  }
  return SITS_ERR_INTERNAL;
}

sits_status fail(sits_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
sits_status guarded(F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    return fail(status_of(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(SITS_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SITS_ERR_INTERNAL, e.what());
  }
}

#define SITS_REQUIRE(cond, msg) \
  do {                          \
    if (!(cond)) return fail(SITS_ERR_USAGE, msg); \
  } while (0)

void emit(sits_line_fn fn, void* user, const std::string& line) {
  if (fn) fn(line.c_str(), user);
}

bool given(const char* s) { return s != nullptr && *s != '\0'; }

Palette palette_near(const fs::path& tile_path, std::int64_t num_classes) {
  const fs::path classes = tile_path.parent_path() / "classes.txt";
  if (fs::is_regular_file(classes)) {
    try {
      return Palette::from_classes(load_index(tile_path.parent_path()).classes);
    } catch (const Error&) {
    }
  }
  return Palette::default_for(num_classes);
}

}  // namespace

extern "C" {

const char* sits_version(void) { return "0.1.0"; }

const char* sits_status_name(sits_status status) {
  switch (status) {
    case SITS_OK: return "ok";
    case SITS_ERR_DIMENSION: return "dimension error";
    case SITS_ERR_PARAMETER: return "parameter error";
    case SITS_ERR_CONFIG: return "config error";
    case SITS_ERR_FORMAT: return "format error";
    case SITS_ERR_RANGE: return "range error";
    case SITS_ERR_DEGENERATE: return "degenerate input";
    case SITS_ERR_GRAPH: return "graph error";
    case SITS_ERR_IO: return "i/o error";
    case SITS_ERR_PALETTE: return "palette error";
    case SITS_ERR_UNSUPPORTED: return "unsupported";
    case SITS_ERR_USAGE: return "usage error";
    case SITS_ERR_SUITE_FAILED: return "suite failed";
    case SITS_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* sits_last_error(void) { return g_last_error.c_str(); }

void sits_synth_options_default(sits_synth_options* o) {
  if (!o) return;
  const SynthOptions d;
  o->tiles = d.num_tiles;
  o->classes = d.num_classes;
  o->bands = d.bands;
  o->timesteps = d.time_steps;
  o->height = d.height;
  o->width = d.width;
  o->seed = d.seed;
  o->train_fraction = d.train_fraction;
  o->val_fraction = d.val_fraction;
}

sits_status sits_synth(const sits_synth_options* o, const char* out_dir) {
  SITS_REQUIRE(o && given(out_dir), "sits_synth: options and output directory are required");
  return guarded([&] {
    if (o->timesteps < 1 || o->timesteps % 16 != 0)
      return fail(SITS_ERR_CONFIG, "time series length " + std::to_string(o->timesteps) +
                                       " is not a positive multiple of 16");
    SynthOptions s;
    s.num_tiles = o->tiles;
    s.num_classes = o->classes;
    s.bands = o->bands;
    s.time_steps = o->timesteps;
    s.height = o->height;
    s.width = o->width;
    s.seed = o->seed;
    s.train_fraction = o->train_fraction;
    s.val_fraction = o->val_fraction;
    synth_dataset(s, out_dir);
    return SITS_OK;
  });
}

sits_status sits_tile_load(const char* path, sits_tile** out) {
  SITS_REQUIRE(given(path) && out, "sits_tile_load: path and output handle are required");
  *out = nullptr;
  return guarded([&] {
    auto t = std::make_unique<sits_tile>();
    t->tile = load_tile(path);
    *out = t.release();
    return SITS_OK;
  });
}

sits_status sits_tile_save(const sits_tile* tile, const char* path) {
  SITS_REQUIRE(tile && given(path), "sits_tile_save: tile and path are required");
  return guarded([&] {
    save_tile(tile->tile, path);
    return SITS_OK;
  });
}

void sits_tile_free(sits_tile* tile) { delete tile; }

sits_status sits_tile_dims(const sits_tile* tile, int64_t dims[5]) {
  SITS_REQUIRE(tile && dims, "sits_tile_dims: tile and dims are required");
  const auto& t = tile->tile;
  dims[0] = t.time_steps;
  dims[1] = t.bands;
  dims[2] = t.height;
  dims[3] = t.width;
  dims[4] = t.num_classes;
  return SITS_OK;
}

sits_status sits_tile_labels(const sits_tile* tile, uint8_t* labels, size_t count) {
  SITS_REQUIRE(tile && labels, "sits_tile_labels: tile and buffer are required");
  if (count != tile->tile.labels.size())
    return fail(SITS_ERR_DIMENSION, "label buffer holds " + std::to_string(count) + " entries, tile has " +
                                        std::to_string(tile->tile.labels.size()));
  std::memcpy(labels, tile->tile.labels.data(), count);
  return SITS_OK;
}

sits_status sits_model_create(const char* preset, uint64_t seed, sits_model** out) {
  SITS_REQUIRE(given(preset) && out, "sits_model_create: preset and output handle are required");
  *out = nullptr;
  return guarded([&] {
    auto m = std::make_unique<sits_model>();
    m->model = std::make_unique<SegmentationModel<float>>(preset_config(preset), seed);
    m->train.seed = seed;
    *out = m.release();
    return SITS_OK;
  });
}

sits_status sits_model_load(const char* checkpoint_path, sits_model** out) {
  SITS_REQUIRE(given(checkpoint_path) && out, "sits_model_load: checkpoint path and output handle are required");
  *out = nullptr;
  return guarded([&] {
    const auto ckpt = load_checkpoint(checkpoint_path);
    auto m = std::make_unique<sits_model>();
    m->model = std::make_unique<SegmentationModel<float>>(ckpt.model, ckpt.train.seed);
    load_parameters(*m->model, ckpt);
    m->train = ckpt.train;
    *out = m.release();
    return SITS_OK;
  });
}

sits_status sits_model_save(const sits_model* model, const char* checkpoint_path) {
  SITS_REQUIRE(model && given(checkpoint_path), "sits_model_save: model and path are required");
  return guarded([&] {
    save_checkpoint(make_checkpoint(*model->model, model->train, nullptr, 0), checkpoint_path);
    return SITS_OK;
  });
}

void sits_model_free(sits_model* model) { delete model; }

sits_status sits_model_shape(const sits_model* model, int64_t shape[5]) {
  SITS_REQUIRE(model && shape, "sits_model_shape: model and shape are required");
  const auto& c = model->model->config();
  shape[0] = c.in_channels;
  shape[1] = c.time_steps;
  shape[2] = c.height;
  shape[3] = c.width;
  shape[4] = c.num_classes;
  return SITS_OK;
}

sits_status sits_model_parameter_count(const sits_model* model, int64_t* count) {
  SITS_REQUIRE(model && count, "sits_model_parameter_count: model and count are required");
  *count = model->model->parameters().total_values();
  return SITS_OK;
}

sits_status sits_model_encoder_stats(const sits_model* model, int64_t* blocks, int64_t bottleneck[3]) {
  SITS_REQUIRE(model && blocks && bottleneck, "sits_model_encoder_stats: all arguments are required");
  return guarded([&] {
    NoGradGuard guard;
    const auto& c = model->model->config();
    const Tensor<float> x(Shape{1, c.in_channels, c.time_steps, c.height, c.width});
    const auto enc = model->model->encode(x);
    *blocks = enc.blocks_executed;
    for (int a = 0; a < 3; ++a) bottleneck[a] = enc.bottleneck.dim(2 + a);
    return SITS_OK;
  });
}

sits_status sits_model_forward(const sits_model* model, const float* input, int64_t batch, float* logits,
                               size_t logits_count) {
  SITS_REQUIRE(model && input && logits && batch >= 1, "sits_model_forward: model, buffers and batch >= 1 are required");
  return guarded([&] {
    const auto& c = model->model->config();
    const auto out_count = static_cast<size_t>(batch * c.num_classes * c.height * c.width);
    if (logits_count != out_count)
      return fail(SITS_ERR_DIMENSION, "logits buffer holds " + std::to_string(logits_count) +
                                          " floats, expected " + std::to_string(out_count));
    const auto in_count = static_cast<size_t>(batch * c.in_channels * c.time_steps * c.height * c.width);
    NoGradGuard guard;
    Tensor<float> x(Shape{batch, c.in_channels, c.time_steps, c.height, c.width},
                    std::vector<float>(input, input + in_count));
    const auto y = model->model->forward(x);
    std::memcpy(logits, y.values().data(), out_count * sizeof(float));
    return SITS_OK;
  });
}

sits_status sits_model_predict(const sits_model* model, const sits_tile* tile, uint8_t* labels, size_t count) {
  SITS_REQUIRE(model && tile && labels, "sits_model_predict: model, tile and buffer are required");
  return guarded([&] {
    const auto pred = predict_labels(*model->model, tile->tile);
    if (count != pred.size())
      return fail(SITS_ERR_DIMENSION, "label buffer holds " + std::to_string(count) + " entries, expected " +
                                          std::to_string(pred.size()));
    std::memcpy(labels, pred.data(), count);
    return SITS_OK;
  });
}

sits_status sits_train(const char* config_path, const char* data_dir, const char* out_dir, int dry_run,
                       sits_line_fn on_line, void* user) {
  SITS_REQUIRE(given(config_path), "sits_train: a config file is required");
  return guarded([&] {
    RunConfig rc = load_run_config(config_path);
    if (given(data_dir)) rc.data_dir = data_dir;
    if (given(out_dir)) rc.out_dir = out_dir;
    if (rc.data_dir.empty()) return fail(SITS_ERR_USAGE, "no data directory given (flag or data_dir key)");
    if (rc.out_dir.empty() && !dry_run)
      return fail(SITS_ERR_USAGE, "no output directory given (flag or out_dir key)");
    {
      std::istringstream echo(format_run_config(rc));
      std::string line;
      while (std::getline(echo, line)) {
        const auto eq = line.find(" = ");
        emit(on_line, user, "config " + line.substr(0, eq) + "=" + line.substr(eq + 3));
      }
    }
    const auto index = load_index(rc.data_dir);
    if (index.classes.size() != static_cast<std::size_t>(rc.model.num_classes))
      return fail(SITS_ERR_CONFIG, "dataset lists " + std::to_string(index.classes.size()) +
                                       " classes but the config has num_classes = " +
                                       std::to_string(rc.model.num_classes));
    if (index.count(Split::Train) == 0) return fail(SITS_ERR_CONFIG, "dataset has no train split");
    if (dry_run) return SITS_OK;
    const auto train = load_split(index, Split::Train);
    const auto val = load_split(index, Split::Val);
    SegmentationModel<float> model(rc.model, rc.train.seed);
    FitOptions fo;
    fo.out_dir = rc.out_dir;
    fo.on_log = [&](const std::string& l) { emit(on_line, user, l); };
    fit(model, train, val, rc.train, fo);
    std::ofstream(rc.out_dir / "config.txt") << format_run_config(rc);
    return SITS_OK;
  });
}

sits_status sits_evaluate(const char* checkpoint_path, const char* data_dir, const char* split, int threads,
                          const char* report_path, sits_line_fn on_line, void* user, double* oa, double* kappa) {
  SITS_REQUIRE(given(checkpoint_path) && given(data_dir) && given(split),
               "sits_evaluate: checkpoint, data directory and split are required");
  return guarded([&] {
    Split which;
    try {
      which = parse_split(split);
    } catch (const Error& e) {
      return fail(SITS_ERR_USAGE, e.what());
    }
    const auto ckpt = load_checkpoint(checkpoint_path);
    SegmentationModel<float> model(ckpt.model, ckpt.train.seed);
    load_parameters(model, ckpt);
    const auto index = load_index(data_dir);
    if (index.count(which) == 0)
      return fail(SITS_ERR_CONFIG, std::string("split '") + split + "' is absent from " + data_dir);
    if (index.classes.size() != static_cast<std::size_t>(ckpt.model.num_classes))
      return fail(SITS_ERR_CONFIG, "dataset lists " + std::to_string(index.classes.size()) +
                                       " classes, checkpoint predicts " + std::to_string(ckpt.model.num_classes));
    const auto tiles = load_split(index, which);
    const auto cm = evaluate(model, tiles, threads < 1 ? 1 : threads);
    std::vector<std::string> names;
    for (const auto& c : index.classes) names.push_back(c.name);
    const std::string report = format_report(cm, names);
    if (given(report_path)) {
      std::ofstream out(report_path, std::ios::trunc);
      if (!out) return fail(SITS_ERR_IO, std::string("cannot write report '") + report_path + "'");
      out << report;
      if (!out.flush()) return fail(SITS_ERR_IO, std::string("failed writing report '") + report_path + "'");
    }
    std::istringstream lines(report);
    std::string line;
    while (std::getline(lines, line)) emit(on_line, user, line);
    if (oa) *oa = overall_accuracy(cm);
    if (kappa) {
      try {
        *kappa = cohen_kappa(cm);
      } catch (const Error&) {
        *kappa = std::nan("");
      }
    }
    return SITS_OK;
  });
}

sits_status sits_predict(const char* checkpoint_path, const char* tile_path, const char* pred_path,
                         const char* actual_path, const char* diff_path, int64_t* disagreements) {
  SITS_REQUIRE(given(checkpoint_path) && given(tile_path) && given(pred_path),
               "sits_predict: checkpoint, tile and output paths are required");
  SITS_REQUIRE(!given(diff_path) || given(actual_path), "a diff image needs the actual map (--actual)");
  return guarded([&] {
    const auto ckpt = load_checkpoint(checkpoint_path);
    SegmentationModel<float> model(ckpt.model, ckpt.train.seed);
    load_parameters(model, ckpt);
    const SitsTile tile = load_tile(tile_path);
    if (tile.bands != ckpt.model.in_channels)
      return fail(SITS_ERR_DIMENSION, "tile has " + std::to_string(tile.bands) + " bands, checkpoint expects " +
                                          std::to_string(ckpt.model.in_channels));
    const auto pred = predict_labels(model, tile);
    const Palette palette = palette_near(tile_path, ckpt.model.num_classes);
    write_ppm(render_class_map(pred, tile.height, tile.width, palette), pred_path);
    if (given(actual_path)) write_ppm(render_class_map(tile.labels, tile.height, tile.width, palette), actual_path);
    const Image diff = render_diff(pred, tile.labels, tile.height, tile.width);
    if (given(diff_path)) write_ppm(diff, diff_path);
    if (disagreements) *disagreements = count_white(diff);
    return SITS_OK;
  });
}

sits_status sits_verify(const char* suite, sits_line_fn on_line, void* user, int* failed) {
  SITS_REQUIRE(given(suite), "sits_verify: a suite name is required");
  return guarded([&] {
    const auto names = verify_suites();
    if (std::find(names.begin(), names.end(), suite) == names.end())
      return fail(SITS_ERR_USAGE, std::string("unknown suite '") + suite +
                                      "' (expected gradcheck, windows, metrics or all)");
    int bad = 0;
    run_verify(suite, [&](const CheckResult& r) {
      if (!r.passed) ++bad;
      emit(on_line, user, std::string(r.passed ? "PASS " : "FAIL ") + r.name + "  " + r.detail);
    });
    if (failed) *failed = bad;
    if (bad > 0) return fail(SITS_ERR_SUITE_FAILED, std::to_string(bad) + " check(s) failed");
    return SITS_OK;
  });
}

}  // extern "C"
