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

#include "swinsits/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <thread>

#include "byteio.hpp"
#include "swinsits/config.hpp"

namespace swinsits {

namespace fs = std::filesystem;

namespace {

constexpr char kCkptMagic[4] = {'S', 'W', 'C', 'K'};
const std::string kMomentumPrefix = "momentum/";

std::string fmt_real(double v) {
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string fmt_log(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.8g", v);
  return buf;
}

void write_tensor(io::ByteWriter& w, const std::string& name, const StoredTensor& t) {
  SWINSITS_CHECK(name.size() <= 0xFFFF, ErrorKind::Format, "tensor name too long: ", name);
  SWINSITS_CHECK(t.shape.size() <= 255, ErrorKind::Format, "tensor '", name, "' has too many axes");
  SWINSITS_CHECK(static_cast<std::int64_t>(t.values.size()) == numel_of(t.shape), ErrorKind::Format,
                 "tensor '", name, "' holds ", t.values.size(), " values for shape ", shape_str(t.shape));
  w.u16(static_cast<std::uint16_t>(name.size()));
  w.text(name);
  w.u8(static_cast<std::uint8_t>(t.shape.size()));
  for (auto d : t.shape) {
    SWINSITS_CHECK(d >= 0 && d <= 0xFFFFFFFFLL, ErrorKind::Format, "tensor '", name, "' extent ", d,
                   " does not fit u32");
    w.u32(static_cast<std::uint32_t>(d));
  }
  w.f32_array(t.values);
}

StoredTensor store(const std::string& name, const Tensor<float>& t) {
  return StoredTensor{name, t.shape(), std::vector<float>(t.values().begin(), t.values().end())};
}

}  // namespace

void TrainConfig::validate() const {
  SWINSITS_CHECK(std::isfinite(lr_max) && std::isfinite(lr_min) && lr_min <= lr_max, ErrorKind::Config,
                 "learning rates must be finite with lr_min <= lr_max (got ", lr_min, " > ", lr_max, ")");
  SWINSITS_CHECK(momentum >= 0.0 && momentum < 1.0, ErrorKind::Config, "momentum ", momentum,
                 " outside [0, 1)");
  SWINSITS_CHECK(epochs >= 1, ErrorKind::Config, "epochs must be at least 1, got ", epochs);
  SWINSITS_CHECK(batch_size >= 1, ErrorKind::Config, "batch_size must be at least 1, got ", batch_size);
}

double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_max, double lr_min) {
  SWINSITS_CHECK(total_steps >= 1, ErrorKind::Parameter, "cosine_lr: total_steps must be >= 1, got ",
                 total_steps);
  SWINSITS_CHECK(step >= 0 && step <= total_steps, ErrorKind::Parameter, "cosine_lr: step ", step,
                 " outside [0, ", total_steps, "]");
  const double c = std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps));
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + c);
}

template <typename T>
void sgd_momentum_step(std::span<T> weights, std::span<const T> grads, std::span<T> velocity, double lr,
                       double momentum) {
  SWINSITS_CHECK(weights.size() == velocity.size() && (grads.empty() || grads.size() == weights.size()),
                 ErrorKind::Dimension, "sgd step: ", weights.size(), " weights, ", grads.size(),
                 " grads, ", velocity.size(), " velocities");
  const T m = static_cast<T>(momentum), a = static_cast<T>(lr);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const T g = grads.empty() ? T(0) : grads[i];
    velocity[i] = m * velocity[i] + g;
    weights[i] -= a * velocity[i];
  }
}

template <typename T>
SgdMomentum<T>::SgdMomentum(const ParameterSet<T>& params) {
  for (const auto& p : params.items()) velocity_.emplace_back(static_cast<std::size_t>(p.tensor.numel()), T(0));
}

template <typename T>
void SgdMomentum<T>::step(ParameterSet<T>& params, double lr, double momentum) {
  auto& items = params.items();
  SWINSITS_CHECK(items.size() == velocity_.size(), ErrorKind::Dimension, "optimizer tracks ",
                 velocity_.size(), " tensors but the model has ", items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& t = items[i].tensor;
    sgd_momentum_step<T>(t.mutable_values(), t.grad(), std::span<T>(velocity_[i]), lr, momentum);
  }
}

template void sgd_momentum_step<float>(std::span<float>, std::span<const float>, std::span<float>, double,
                                       double);
template void sgd_momentum_step<double>(std::span<double>, std::span<const double>, std::span<double>,
                                        double, double);
template class SgdMomentum<float>;
template class SgdMomentum<double>;

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  RunConfig rc;
  rc.model = ckpt.model;
  rc.train = ckpt.train;
  std::string text = format_run_config(rc, false);
  text = text.substr(text.find('\n') + 1);  // values are explicit; no preset line
  text += "global_step = " + std::to_string(ckpt.global_step) + "\n";
  text += "epoch_loss_sum = " + fmt_real(ckpt.epoch_loss_sum) + "\n";
  text += "epoch_loss_count = " + std::to_string(ckpt.epoch_loss_count) + "\n";
  text += "best_val_oa = " + fmt_real(ckpt.best_val_oa) + "\n";

  SWINSITS_CHECK(ckpt.velocity.empty() || ckpt.velocity.size() == ckpt.parameters.size(),
                 ErrorKind::Format, "checkpoint velocity count ", ckpt.velocity.size(),
                 " does not match parameter count ", ckpt.parameters.size());
  io::ByteWriter w;
  w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(kCkptMagic), 4));
  w.u32(ckpt.version);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.text(text);
  w.u32(static_cast<std::uint32_t>(ckpt.parameters.size() + ckpt.velocity.size()));
  for (const auto& t : ckpt.parameters) write_tensor(w, t.name, t);
  for (const auto& t : ckpt.velocity) write_tensor(w, kMomentumPrefix + t.name, t);
  return std::move(w.buffer());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "checkpoint");
  auto magic = r.bytes(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kCkptMagic)) r.fail(0, "bad magic, expected \"SWCK\"");
  Checkpoint ckpt;
  ckpt.version = r.u32("version");
  if (ckpt.version != kCheckpointVersion)
    r.fail(4, "unsupported version " + std::to_string(ckpt.version) + " (expected " +
                  std::to_string(kCheckpointVersion) + ")");
  const auto text_len = r.u32("config length");
  auto text_bytes = r.bytes(text_len, "config text");
  const std::string text(text_bytes.begin(), text_bytes.end());

  RunConfig rc;
  try {
    for (const auto& e : tokenize_config(text, "checkpoint config")) {
      auto int_of = [&](const std::string& v) {
        std::int64_t out = 0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || p != v.data() + v.size())
          detail::raise(ErrorKind::Config, "checkpoint config:", e.line, ": bad integer '", v, "'");
        return out;
      };
      auto real_of = [&](const std::string& v) {
        double out = 0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || p != v.data() + v.size())
          detail::raise(ErrorKind::Config, "checkpoint config:", e.line, ": bad number '", v, "'");
        return out;
      };
      if (e.key == "global_step") ckpt.global_step = int_of(e.value);
      else if (e.key == "epoch_loss_sum") ckpt.epoch_loss_sum = real_of(e.value);
      else if (e.key == "epoch_loss_count") ckpt.epoch_loss_count = int_of(e.value);
      else if (e.key == "best_val_oa") ckpt.best_val_oa = real_of(e.value);
      else apply_config_key(rc, e, "checkpoint config");
    }
    rc.validate();
  } catch (const Error& e) {
    r.fail(12, std::string("invalid embedded config: ") + e.what());
  }
  ckpt.model = rc.model;
  ckpt.train = rc.train;

  const auto count = r.u32("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t at = r.offset();
    const auto name_len = r.u16("tensor name length");
    auto name_bytes = r.bytes(name_len, "tensor name");
    StoredTensor t;
    t.name.assign(name_bytes.begin(), name_bytes.end());
    const auto rank = r.u8("tensor rank");
    for (int k = 0; k < rank; ++k) t.shape.push_back(r.u32("tensor extent"));
    const auto n = numel_of(t.shape);
    if (n > static_cast<std::int64_t>(r.remaining() / 4)) r.fail(at, "tensor '" + t.name + "' payload truncated");
    t.values.resize(static_cast<std::size_t>(n));
    r.f32_array(t.values, "tensor payload");
    if (t.name.rfind(kMomentumPrefix, 0) == 0) {
      t.name = t.name.substr(kMomentumPrefix.size());
      ckpt.velocity.push_back(std::move(t));
    } else {
      if (!ckpt.velocity.empty()) r.fail(at, "parameter tensor '" + t.name + "' after velocity tensors");
      ckpt.parameters.push_back(std::move(t));
    }
  }
  if (r.remaining() != 0) r.fail(r.offset(), "trailing bytes after tensors");
  for (std::size_t i = 0; i < ckpt.parameters.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (ckpt.parameters[i].name == ckpt.parameters[j].name)
        r.fail(0, "duplicate tensor name '" + ckpt.parameters[i].name + "'");
  if (!ckpt.velocity.empty()) {
    if (ckpt.velocity.size() != ckpt.parameters.size())
      r.fail(0, "velocity count does not match parameter count");
    for (std::size_t i = 0; i < ckpt.velocity.size(); ++i)
      if (ckpt.velocity[i].name != ckpt.parameters[i].name || ckpt.velocity[i].shape != ckpt.parameters[i].shape)
        r.fail(0, "velocity tensor '" + ckpt.velocity[i].name + "' does not pair with its parameter");
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  io::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const fs::path& path) {
  const auto bytes = io::read_file(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

Checkpoint make_checkpoint(const SegmentationModel<float>& model, const TrainConfig& train,
                           const SgdMomentum<float>* optimizer, std::int64_t global_step) {
  Checkpoint c;
  c.model = model.config();
  c.train = train;
  c.global_step = global_step;
  const auto& items = model.parameters().items();
  for (const auto& p : items) c.parameters.push_back(store(p.name, p.tensor));
  if (optimizer) {
    SWINSITS_CHECK(optimizer->velocity().size() == items.size(), ErrorKind::Dimension,
                   "optimizer state does not match the model");
    for (std::size_t i = 0; i < items.size(); ++i)
      c.velocity.push_back(StoredTensor{items[i].name, items[i].tensor.shape(), optimizer->velocity()[i]});
  }
  return c;
}

void load_parameters(SegmentationModel<float>& model, const Checkpoint& ckpt) {
  auto& items = model.parameters().items();
  for (auto& p : items) {
    auto it = std::find_if(ckpt.parameters.begin(), ckpt.parameters.end(),
                           [&](const StoredTensor& s) { return s.name == p.name; });
    SWINSITS_CHECK(it != ckpt.parameters.end(), ErrorKind::Dimension, "checkpoint has no tensor '", p.name,
                   "' (model expects shape ", shape_str(p.tensor.shape()), ")");
    SWINSITS_CHECK(it->shape == p.tensor.shape(), ErrorKind::Dimension, "tensor '", p.name,
                   "' has shape ", shape_str(it->shape), " in the checkpoint but ",
                   shape_str(p.tensor.shape()), " in the model");
  }
  SWINSITS_CHECK(ckpt.parameters.size() == items.size(), ErrorKind::Dimension, "checkpoint holds ",
                 ckpt.parameters.size(), " parameter tensors, model has ", items.size());
  for (auto& p : items) {
    auto it = std::find_if(ckpt.parameters.begin(), ckpt.parameters.end(),
                           [&](const StoredTensor& s) { return s.name == p.name; });
    std::copy(it->values.begin(), it->values.end(), p.tensor.mutable_values().begin());
  }
}

void load_velocity(SgdMomentum<float>& optimizer, const SegmentationModel<float>& model,
                   const Checkpoint& ckpt) {
  const auto& items = model.parameters().items();
  optimizer = SgdMomentum<float>(model.parameters());
  if (ckpt.velocity.empty()) return;
  SWINSITS_CHECK(ckpt.velocity.size() == items.size(), ErrorKind::Dimension, "checkpoint holds ",
                 ckpt.velocity.size(), " velocity tensors, model has ", items.size(), " parameters");
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& v = ckpt.velocity[i];
    SWINSITS_CHECK(v.name == items[i].name && v.shape == items[i].tensor.shape(), ErrorKind::Dimension,
                   "velocity tensor '", v.name, "' does not match model tensor '", items[i].name, "'");
    optimizer.velocity()[i] = v.values;
  }
}

SitsTile conform_tile(const SitsTile& tile, const ModelConfig& cfg) {
  SWINSITS_CHECK(tile.bands == cfg.in_channels, ErrorKind::Dimension, "tile has ", tile.bands,
                 " bands but the model expects ", cfg.in_channels);
  SWINSITS_CHECK(tile.height == cfg.height && tile.width == cfg.width, ErrorKind::Dimension, "tile is ",
                 tile.height, "x", tile.width, " but the model expects ", cfg.height, "x", cfg.width);
  SWINSITS_CHECK(tile.num_classes <= cfg.num_classes, ErrorKind::Dimension, "tile declares ",
                 tile.num_classes, " classes but the model predicts ", cfg.num_classes);
  if (tile.time_steps == cfg.time_steps) return tile;
  return temporal_resample(tile, cfg.time_steps);
}

Tensor<float> tiles_to_input(const std::vector<const SitsTile*>& tiles, std::vector<std::int32_t>* labels) {
  SWINSITS_CHECK(!tiles.empty(), ErrorKind::Dimension, "tiles_to_input: empty batch");
  const auto& f = *tiles[0];
  const std::int64_t T = f.time_steps, C = f.bands, HW = f.height * f.width;
  const auto B = static_cast<std::int64_t>(tiles.size());
  std::vector<float> x(static_cast<std::size_t>(B * C * T * HW));
  if (labels) labels->clear();
  for (std::int64_t b = 0; b < B; ++b) {
    const auto& tile = *tiles[static_cast<std::size_t>(b)];
    SWINSITS_CHECK(tile.time_steps == T && tile.bands == C && tile.height == f.height && tile.width == f.width,
                   ErrorKind::Dimension, "tiles_to_input: tile ", b, " extents differ from tile 0");
    for (std::int64_t c = 0; c < C; ++c)
      for (std::int64_t t = 0; t < T; ++t)
        std::copy_n(tile.values.begin() + (t * C + c) * HW, HW, x.begin() + ((b * C + c) * T + t) * HW);
    if (labels) labels->insert(labels->end(), tile.labels.begin(), tile.labels.end());
  }
  return Tensor<float>(Shape{B, C, T, f.height, f.width}, std::move(x));
}

std::vector<std::uint8_t> predict_labels(const SegmentationModel<float>& model, const SitsTile& tile) {
  NoGradGuard guard;
  const SitsTile t = conform_tile(tile, model.config());
  const auto logits = model.forward(tiles_to_input({&t}, nullptr));
  const std::int64_t K = logits.dim(1), HW = t.height * t.width;
  const auto v = logits.values();
  std::vector<std::uint8_t> out(static_cast<std::size_t>(HW));
  for (std::int64_t p = 0; p < HW; ++p) {
    std::int64_t best = 0;
    for (std::int64_t k = 1; k < K; ++k)
      if (v[static_cast<std::size_t>(k * HW + p)] > v[static_cast<std::size_t>(best * HW + p)]) best = k;
    out[static_cast<std::size_t>(p)] = static_cast<std::uint8_t>(best);
  }
  return out;
}

ConfusionMatrix evaluate(const SegmentationModel<float>& model, const std::vector<SitsTile>& tiles,
                         int threads) {
  const auto K = model.config().num_classes;
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(tiles.size())));
  std::vector<ConfusionMatrix> partial(static_cast<std::size_t>(workers), ConfusionMatrix(K));
  auto run = [&](int w) {
    for (std::size_t i = static_cast<std::size_t>(w); i < tiles.size(); i += static_cast<std::size_t>(workers))
      accumulate(partial[static_cast<std::size_t>(w)], predict_labels(model, tiles[i]), tiles[i].labels);
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          run(w);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  ConfusionMatrix cm(K);
  for (const auto& p : partial) cm.merge(p);
  return cm;
}

std::int64_t steps_per_epoch(std::int64_t num_tiles, std::int64_t batch_size) {
  return (num_tiles + batch_size - 1) / batch_size;
}

std::vector<std::int64_t> epoch_order(std::int64_t n, std::uint64_t seed, std::int64_t epoch) {
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  SplitMix64 rng(seed + static_cast<std::uint64_t>(epoch));
  for (std::int64_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  return order;
}

FitResult fit(SegmentationModel<float>& model, const std::vector<SitsTile>& train_in,
              const std::vector<SitsTile>& val_in, const TrainConfig& cfg, const FitOptions& options) {
  cfg.validate();
  SWINSITS_CHECK(!train_in.empty(), ErrorKind::Config, "fit: the train split is empty");
  const auto& mcfg = model.config();
  std::vector<SitsTile> train, val;
  for (const auto& t : train_in) train.push_back(conform_tile(t, mcfg));
  for (const auto& t : val_in) val.push_back(conform_tile(t, mcfg));

  const auto n = static_cast<std::int64_t>(train.size());
  const auto spe = steps_per_epoch(n, cfg.batch_size);
  FitResult result;
  result.total_steps = spe * cfg.epochs;

  SgdMomentum<float> optimizer(model.parameters());
  std::int64_t step = 0;
  double loss_sum = 0.0;
  std::int64_t loss_count = 0;
  double best = -1.0;
  if (options.resume) {
    const auto& r = *options.resume;
    SWINSITS_CHECK(r.model == mcfg, ErrorKind::Config, "resume: checkpoint model config differs from the model");
    SWINSITS_CHECK(r.train == cfg, ErrorKind::Config, "resume: checkpoint train config differs from the request");
    SWINSITS_CHECK(r.global_step >= 0 && r.global_step <= result.total_steps, ErrorKind::Config,
                   "resume: checkpoint step ", r.global_step, " outside the run of ", result.total_steps,
                   " steps");
    load_parameters(model, r);
    load_velocity(optimizer, model, r);
    step = r.global_step;
    loss_sum = r.epoch_loss_sum;
    loss_count = r.epoch_loss_count;
    best = r.best_val_oa;
  }

  const bool writing = !options.out_dir.empty();
  std::ofstream log_file;
  if (writing) {
    std::error_code ec;
    fs::create_directories(options.out_dir, ec);
    SWINSITS_CHECK(!ec && fs::is_directory(options.out_dir), ErrorKind::Io, "cannot create output directory '",
                   options.out_dir.string(), "'");
    log_file.open(options.out_dir / "train.log", options.resume ? std::ios::app : std::ios::trunc);
    SWINSITS_CHECK(log_file.good(), ErrorKind::Io, "cannot write '", (options.out_dir / "train.log").string(), "'");
  }
  auto log = [&](const std::string& line) {
    result.log.push_back(line);
    if (writing) log_file << line << '\n' << std::flush;
    if (options.on_log) options.on_log(line);
  };
  auto snapshot = [&] {
    Checkpoint c = make_checkpoint(model, cfg, &optimizer, step);
    c.epoch_loss_sum = loss_sum;
    c.epoch_loss_count = loss_count;
    c.best_val_oa = best;
    return c;
  };

  auto& params = model.parameters();
  params.zero_grad();
  std::int64_t order_epoch = -1;
  std::vector<std::int64_t> order;
  std::int64_t ran = 0;
  double last_lr = 0.0;
  std::vector<std::int32_t> labels;
  while (step < result.total_steps) {
    if (options.stop_after_steps > 0 && ran >= options.stop_after_steps) break;
    const std::int64_t epoch = step / spe, pos = step % spe;
    if (epoch != order_epoch) {
      order = epoch_order(n, cfg.seed, epoch);
      order_epoch = epoch;
    }
    SplitMix64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(step)));
    std::vector<SitsTile> augmented;
    std::vector<const SitsTile*> batch;
    const std::int64_t end = std::min(n, (pos + 1) * cfg.batch_size);
    for (std::int64_t i = pos * cfg.batch_size; i < end; ++i) {
      const SitsTile& t = train[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
      if (cfg.augment) augmented.push_back(augment_flip(t, rng));
      else batch.push_back(&t);
    }
    for (const auto& t : augmented) batch.push_back(&t);

    const auto input = tiles_to_input(batch, &labels);
    const ForwardContext ctx{true, &rng};
    const auto logits = model.forward(input, ctx);
    const auto loss = cross_entropy(logits, std::span<const std::int32_t>(labels),
                                    static_cast<std::int32_t>(cfg.ignore_id));
    const double loss_value = loss.item();
    backward(loss);
    last_lr = cosine_lr(step, result.total_steps, cfg.lr_max, cfg.lr_min);
    optimizer.step(params, last_lr, cfg.momentum);
    params.zero_grad();

    ++step;
    ++ran;
    loss_sum += loss_value;
    ++loss_count;
    result.step_losses.push_back(loss_value);

    if (step % spe == 0) {
      const std::int64_t done_epoch = step / spe;
      log("epoch=" + std::to_string(done_epoch) + " step=" + std::to_string(step) + " lr=" + fmt_log(last_lr) +
          " loss=" + fmt_log(loss_sum / static_cast<double>(loss_count)));
      loss_sum = 0.0;
      loss_count = 0;
      if (!val.empty()) {
        const auto cm = evaluate(model, val, 1);
        const double oa = overall_accuracy(cm);
        std::string kappa = "undefined";
        try {
          kappa = fmt_log(cohen_kappa(cm));
        } catch (const Error&) {
        }
        log("val epoch=" + std::to_string(done_epoch) + " oa=" + fmt_log(oa) + " kappa=" + kappa);
        if (oa > best) {
          best = oa;
          if (writing) save_checkpoint(snapshot(), options.out_dir / "best.ckpt");
        }
      }
    }
  }

  if (step == result.total_steps && options.final_train_eval) {
    result.final_train_oa = overall_accuracy(evaluate(model, train, 1));
    log("final train_oa=" + fmt_log(result.final_train_oa));
  }
  result.global_step = step;
  result.best_val_oa = best;
  result.last = snapshot();
  if (writing) save_checkpoint(result.last, options.out_dir / "final.ckpt");
  return result;
}

}  // namespace swinsits
