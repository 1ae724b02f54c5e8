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
#include <filesystem>
#include <numeric>

#include "oracles.hpp"
#include "swinsits/error.hpp"
#include "swinsits/train.hpp"

using namespace swinsits;
namespace fs = std::filesystem;

namespace {

ModelConfig small_config() {
  ModelConfig cfg = ModelConfig::tiny();
  cfg.height = 16;
  cfg.width = 16;
  cfg.window = {2, 2, 2};
  return cfg;
}

std::vector<SitsTile> small_tiles(std::size_t n, std::uint64_t seed) {
  SynthOptions o;
  o.height = 16;
  o.width = 16;
  SplitMix64 rng(seed);
  std::vector<SitsTile> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(synth_tile(o, rng));
  return out;
}

TrainConfig quick(std::int64_t epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.seed = 11;
  return t;
}

FitOptions silent(std::int64_t stop = 0) {
  FitOptions o;
  o.stop_after_steps = stop;
  o.final_train_eval = false;
  return o;
}

template <typename F>
Error error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "no error raised";
  return Error(ErrorKind::Unsupported, "none");
}

}  // namespace

TEST(CosineLr, EndpointsAndShape) {
  for (const std::int64_t n : {1, 7, 1000}) {
    EXPECT_NEAR(cosine_lr(0, n, 0.01, 0.0), 0.01, 1e-12);
    EXPECT_NEAR(cosine_lr(n, n, 0.01, 0.0), 0.0, 1e-12);
    EXPECT_NEAR(cosine_lr(n, n, 0.05, 0.001), 0.001, 1e-12);
  }
  EXPECT_NEAR(cosine_lr(50, 100, 0.01, 0.002), 0.006, 1e-12);
  EXPECT_NEAR(cosine_lr(25, 100, 1.0, 0.0), 0.5 * (1 + std::sqrt(0.5)), 1e-12);
  double prev = 1.0;
  for (std::int64_t s = 0; s <= 300; ++s) {
    const double lr = cosine_lr(s, 300, 0.01, 0.0);
    ASSERT_LE(lr, prev);
    prev = lr;
  }
  EXPECT_EQ(error_of([] { cosine_lr(11, 10, 0.01, 0.0); }).kind(), ErrorKind::Parameter);
}

TEST(Sgd, HandValues) {
  std::vector<double> w{1.0}, v{0.0};
  const std::vector<double> g{0.5};
  sgd_momentum_step<double>(w, g, v, 0.1, 0.9);
  EXPECT_NEAR(v[0], 0.5, 1e-15);
  EXPECT_NEAR(w[0], 0.95, 1e-15);
  sgd_momentum_step<double>(w, g, v, 0.1, 0.9);
  EXPECT_NEAR(v[0], 0.95, 1e-15);
  EXPECT_NEAR(w[0], 0.855, 1e-15);

  std::vector<double> w2{2.0, -1.0}, v2{0.0, 0.0};
  const std::vector<double> g2{0.25, -0.5};
  sgd_momentum_step<double>(w2, g2, v2, 1.0, 0.0);
  EXPECT_EQ(w2, (std::vector<double>{1.75, -0.5}));

  std::vector<double> w3{3.0, 4.0}, v3{0.0, 0.0};
  const std::vector<double> zero{0.0, 0.0};
  for (int i = 0; i < 5; ++i) sgd_momentum_step<double>(w3, zero, v3, 0.1, 0.9);
  EXPECT_EQ(w3, (std::vector<double>{3.0, 4.0}));
  sgd_momentum_step<double>(w3, std::span<const double>{}, v3, 0.1, 0.9);
  EXPECT_EQ(w3, (std::vector<double>{3.0, 4.0}));
  EXPECT_EQ(error_of([&] { sgd_momentum_step<double>(w3, g, v3, 0.1, 0.9); }).kind(), ErrorKind::Dimension);
}

TEST(Sgd, ParametersWithoutGradientCoast) {
  SegmentationModel<float> model(small_config(), 3);
  SgdMomentum<float> opt(model.parameters());
  auto& first = model.parameters().items()[0].tensor;
  const std::vector<float> before(first.values().begin(), first.values().end());
  auto g = first.mutable_grad();
  std::fill(g.begin(), g.end(), 1.0f);
  opt.step(model.parameters(), 0.5, 0.9);
  for (std::size_t i = 0; i < before.size(); ++i) ASSERT_EQ(first.values()[i], before[i] - 0.5f);
  model.parameters().zero_grad();
  opt.step(model.parameters(), 0.5, 0.9);
  for (std::size_t i = 0; i < before.size(); ++i) ASSERT_NEAR(first.values()[i], before[i] - 0.95f, 1e-6);
  const auto& last = model.parameters().items().back();
  EXPECT_TRUE(std::all_of(opt.velocity().back().begin(), opt.velocity().back().end(),
                          [](float v) { return v == 0.0f; }))
      << last.name;
}

TEST(Schedule, EpochOrderIsSeededFisherYates) {
  for (const std::uint64_t seed : {0ull, 5ull, 1234567ull})
    for (const std::int64_t epoch : {0, 1, 9}) {
      const std::int64_t n = 13;
      std::vector<std::int64_t> ref(n);
      std::iota(ref.begin(), ref.end(), 0);
      oracle::RefSplitMix g{seed + static_cast<std::uint64_t>(epoch)};
      for (std::int64_t i = n - 1; i > 0; --i) std::swap(ref[i], ref[g.next() % static_cast<std::uint64_t>(i + 1)]);
      EXPECT_EQ(epoch_order(n, seed, epoch), ref);
    }
  EXPECT_NE(epoch_order(20, 1, 0), epoch_order(20, 1, 1));
  auto p = epoch_order(50, 3, 2);
  std::sort(p.begin(), p.end());
  for (std::int64_t i = 0; i < 50; ++i) ASSERT_EQ(p[i], i);
  EXPECT_EQ(steps_per_epoch(64, 2), 32);
  EXPECT_EQ(steps_per_epoch(7, 2), 4);
  EXPECT_EQ(steps_per_epoch(1, 8), 1);
}

TEST(Batch, InputLayout) {
  const auto tiles = small_tiles(2, 4);
  std::vector<std::int32_t> labels;
  const auto x = tiles_to_input({&tiles[0], &tiles[1]}, &labels);
  ASSERT_EQ(x.shape(), (Shape{2, 4, 16, 16, 16}));
  ASSERT_EQ(labels.size(), 2u * 256);
  for (std::int64_t b = 0; b < 2; ++b)
    for (std::int64_t c = 0; c < 4; c += 3)
      for (std::int64_t t = 0; t < 16; t += 5)
        for (std::int64_t p = 0; p < 256; p += 17)
          ASSERT_EQ(x.values()[(((b * 4 + c) * 16 + t) * 256) + p], tiles[b].values[(t * 4 + c) * 256 + p]);
  EXPECT_EQ(labels[256 + 3], tiles[1].labels[3]);
}

TEST(Batch, ConformTile) {
  const auto cfg = small_config();
  auto t = small_tiles(1, 5)[0];
  EXPECT_EQ(conform_tile(t, cfg).values, t.values);
  auto cfg32 = cfg;
  cfg32.time_steps = 32;
  EXPECT_EQ(conform_tile(t, cfg32).time_steps, 32);
  auto bands = cfg;
  bands.in_channels = 5;
  EXPECT_EQ(error_of([&] { conform_tile(t, bands); }).kind(), ErrorKind::Dimension);
  auto wide = cfg;
  wide.width = 32;
  EXPECT_EQ(error_of([&] { conform_tile(t, wide); }).kind(), ErrorKind::Dimension);
}

TEST(Checkpoint, RoundTrip) {
  SegmentationModel<float> model(small_config(), 8);
  SgdMomentum<float> opt(model.parameters());
  for (auto& v : opt.velocity()) std::fill(v.begin(), v.end(), 0.125f);
  auto ck = make_checkpoint(model, quick(3), &opt, 17);
  ck.epoch_loss_sum = 2.5;
  ck.epoch_loss_count = 3;
  ck.best_val_oa = 0.75;
  const auto bytes = encode_checkpoint(ck);
  ASSERT_GE(bytes.size(), 8u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "SWCK");
  EXPECT_EQ(bytes[4], kCheckpointVersion);
  const auto back = decode_checkpoint(bytes);
  EXPECT_EQ(back, ck);
  EXPECT_EQ(encode_checkpoint(back), bytes);

  const auto p = fs::temp_directory_path() / "swinsits_test_train.ckpt";
  save_checkpoint(ck, p);
  EXPECT_EQ(load_checkpoint(p), ck);
  fs::remove(p);

  SegmentationModel<float> other(small_config(), 9);
  load_parameters(other, back);
  for (std::size_t i = 0; i < other.parameters().items().size(); ++i) {
    const auto a = model.parameters().items()[i].tensor.values();
    const auto b = other.parameters().items()[i].tensor.values();
    ASSERT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
  SgdMomentum<float> opt2(other.parameters());
  load_velocity(opt2, other, back);
  EXPECT_EQ(opt2.velocity(), opt.velocity());

  std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + bytes.size() / 2);
  EXPECT_THROW(decode_checkpoint(cut), Error);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), Error);
}

TEST(Checkpoint, MismatchedModelNamesTensor) {
  SegmentationModel<float> model(small_config(), 1);
  const auto ck = make_checkpoint(model, quick(1), nullptr, 0);
  EXPECT_TRUE(ck.velocity.empty());
  auto cfg = small_config();
  cfg.embed_dim = 8;
  cfg.num_heads = {2, 2, 4};
  SegmentationModel<float> other(cfg, 1);
  const auto e = error_of([&] { load_parameters(other, ck); });
  EXPECT_EQ(e.kind(), ErrorKind::Dimension);
  EXPECT_NE(std::string(e.what()).find("encoder.patch_embed.weight"), std::string::npos) << e.what();
}

TEST(Fit, FiveStepsDeterministic) {
  const auto tiles = small_tiles(4, 21);
  auto run = [&](std::uint64_t seed) {
    SegmentationModel<float> model(small_config(), 2);
    auto cfg = quick(3);
    cfg.seed = seed;
    auto r = fit(model, tiles, {}, cfg, silent(5));
    EXPECT_EQ(r.global_step, 5);
    EXPECT_EQ(r.step_losses.size(), 5u);
    return encode_checkpoint(r.last);
  };
  const auto a = run(11);
  EXPECT_EQ(run(11), a);
  EXPECT_NE(run(12), a);
}

TEST(Fit, ResumeContinuesTheSameRun) {
  const auto tiles = small_tiles(3, 22);
  const auto val = small_tiles(1, 23);
  SegmentationModel<float> full(small_config(), 4);
  const auto whole = fit(full, tiles, val, quick(3), silent());
  ASSERT_EQ(whole.total_steps, 6);
  ASSERT_EQ(whole.global_step, 6);

  SegmentationModel<float> first(small_config(), 4);
  const auto part = fit(first, tiles, val, quick(3), silent(3));
  ASSERT_EQ(part.global_step, 3);
  const auto stored = decode_checkpoint(encode_checkpoint(part.last));

  SegmentationModel<float> resumed(small_config(), 99);
  auto opts = silent();
  opts.resume = &stored;
  const auto rest = fit(resumed, tiles, val, quick(3), opts);
  EXPECT_EQ(rest.global_step, 6);
  std::vector<double> joined = part.step_losses;
  joined.insert(joined.end(), rest.step_losses.begin(), rest.step_losses.end());
  EXPECT_EQ(joined, whole.step_losses);
  std::vector<std::string> log = part.log;
  log.insert(log.end(), rest.log.begin(), rest.log.end());
  EXPECT_EQ(log, whole.log);
  EXPECT_EQ(encode_checkpoint(rest.last), encode_checkpoint(whole.last));

  auto changed = quick(4);
  SegmentationModel<float> again(small_config(), 4);
  EXPECT_EQ(error_of([&] { fit(again, tiles, val, changed, opts); }).kind(), ErrorKind::Config);
}

TEST(Fit, RejectsEmptyRuns) {
  const auto tiles = small_tiles(1, 24);
  SegmentationModel<float> model(small_config(), 5);
  EXPECT_EQ(error_of([&] { fit(model, tiles, {}, quick(0), silent()); }).kind(), ErrorKind::Config);
  EXPECT_EQ(error_of([&] { fit(model, {}, {}, quick(1), silent()); }).kind(), ErrorKind::Config);
}

TEST(Fit, LossFallsFromChanceLevel) {
  const auto tiles = small_tiles(2, 25);
  SegmentationModel<float> model(small_config(), 6);
  auto cfg = quick(40);
  cfg.batch_size = 2;
  cfg.lr_max = 0.05;
  const auto r = fit(model, tiles, {}, cfg, silent());
  ASSERT_EQ(r.step_losses.size(), 40u);
  EXPECT_NEAR(r.step_losses.front(), std::log(5.0), 0.5);
  const double tail = (r.step_losses[37] + r.step_losses[38] + r.step_losses[39]) / 3;
  EXPECT_LT(tail, 0.6 * r.step_losses.front());
}

TEST(Fit, ZeroLearningRateLeavesWeights) {
  const auto tiles = small_tiles(2, 26);
  SegmentationModel<float> model(small_config(), 7);
  const auto before = make_checkpoint(model, quick(1), nullptr, 0).parameters;
  auto cfg = quick(2);
  cfg.lr_max = 0.0;
  const auto r = fit(model, tiles, {}, cfg, silent());
  EXPECT_EQ(r.global_step, 2);
  EXPECT_EQ(make_checkpoint(model, cfg, nullptr, 0).parameters, before);
}

TEST(Fit, LogLinesAndOutputs) {
  const auto tiles = small_tiles(2, 27);
  const auto val = small_tiles(1, 28);
  const auto dir = fs::temp_directory_path() / "swinsits_test_train_out";
  fs::remove_all(dir);
  SegmentationModel<float> model(small_config(), 8);
  FitOptions o;
  o.out_dir = dir;
  std::vector<std::string> seen;
  o.on_log = [&](const std::string& s) { seen.push_back(s); };
  const auto r = fit(model, tiles, val, quick(2), o);
  ASSERT_EQ(r.log.size(), 5u);
  EXPECT_EQ(seen, r.log);
  EXPECT_EQ(r.log[0].rfind("epoch=1 step=1 lr=", 0), 0u) << r.log[0];
  EXPECT_NE(r.log[0].find(" loss="), std::string::npos);
  EXPECT_EQ(r.log[1].rfind("val epoch=1 oa=", 0), 0u) << r.log[1];
  EXPECT_NE(r.log[1].find(" kappa="), std::string::npos);
  EXPECT_EQ(r.log[4].rfind("final train_oa=", 0), 0u) << r.log[4];
  EXPECT_GE(r.final_train_oa, 0.0);
  EXPECT_TRUE(fs::exists(dir / "train.log"));
  EXPECT_TRUE(fs::exists(dir / "best.ckpt"));
  EXPECT_EQ(load_checkpoint(dir / "final.ckpt"), r.last);
  fs::remove_all(dir);
}

TEST(Evaluate, ThreadsAgreeAndPredictionsInRange) {
  const auto tiles = small_tiles(3, 29);
  SegmentationModel<float> model(small_config(), 9);
  EXPECT_EQ(evaluate(model, tiles, 1), evaluate(model, tiles, 2));
  const auto pred = predict_labels(model, tiles[0]);
  ASSERT_EQ(pred.size(), 256u);
  for (auto p : pred) ASSERT_LT(p, 5);
  EXPECT_EQ(evaluate(model, tiles, 1).total(), 3u * 256);
}
