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

// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// nonzero when any fails. Arguments select criteria by number (default: all).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <string>

#include "oracles.hpp"
#include "swinsits/data.hpp"
#include "swinsits/swin.hpp"
#include "swinsits/train.hpp"
#include "swinsits/verify.hpp"

using namespace swinsits;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string dims_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + ")";
}

fs::path workdir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("swinsits_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<SitsTile> synth_split(std::int64_t n, double train_fraction, double val_fraction, Split split,
                                  const std::string& name) {
  SynthOptions o;
  o.num_tiles = n;
  o.seed = 1;
  o.train_fraction = train_fraction;
  o.val_fraction = val_fraction;
  const auto dir = workdir(name);
  auto tiles = load_split(synth_dataset(o, dir), split);
  fs::remove_all(dir);
  return tiles;
}

Tensorf random_input(const ModelConfig& c, std::uint64_t seed) {
  Tensorf x(Shape{1, c.in_channels, c.time_steps, c.height, c.width});
  SplitMix64 r(seed);
  for (auto& v : x.mutable_values()) v = static_cast<float>(r.uniform());
  return x;
}

Outcome shape_contract() {
  const auto cfg = ModelConfig::munich_like();
  SegmentationModel<float> model(cfg, 1);
  const auto x = random_input(cfg, 2);
  NoGradGuard guard;
  const auto t0 = Clock::now();
  const auto y = model.forward(x);
  const double s = seconds_since(t0);
  const bool ok = y.shape() == Shape{1, 18, 48, 48} && s < 60.0;
  return {ok, "input " + dims_str(x.shape()) + " -> " + dims_str(y.shape()) + " in " + fmt("%.2f", s) + " s"};
}

Outcome architecture_counts() {
  const auto cfg = ModelConfig::munich_like();
  SegmentationModel<float> model(cfg, 1);
  NoGradGuard guard;
  const auto enc = model.encode(random_input(cfg, 3));
  const auto& b = enc.bottleneck.shape();
  const Shape extents{b[2], b[3], b[4]};
  const bool ok = enc.blocks_executed == 6 && extents == Shape{2, 3, 3};
  return {ok, std::to_string(enc.blocks_executed) + " transformer blocks, bottleneck extents " + dims_str(extents)};
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  const auto results = run_verify("gradcheck");
  const double s = seconds_since(t0);
  int failed = 0;
  std::string first;
  for (const auto& r : results)
    if (!r.passed) {
      if (!failed) first = r.name + ": " + r.detail;
      ++failed;
    }
  std::string detail = std::to_string(results.size()) + " checks, " + std::to_string(failed) + " failed, " +
                       fmt("%.1f", s) + " s";
  if (failed) detail += "; first failure " + first;
  return {failed == 0 && !results.empty() && s < 300.0, detail};
}

std::vector<double> vec(const Tensord& t) { return {t.values().begin(), t.values().end()}; }

Outcome shifted_window_oracle() {
  const Triple dims{4, 6, 6}, win{2, 3, 3};
  const std::int64_t C = 6;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    ParameterSet<double> ps;
    SplitMix64 rng(seed);
    WindowAttention<double> a(ps, "a", C, 3, win, 0, 0, rng);
    for (auto& item : ps.items()) {
      auto v = item.tensor.mutable_values();
      const auto r = oracle::random_values(v.size(), seed * 100 + v.size(), -0.5, 0.5);
      std::copy(r.begin(), r.end(), v.begin());
    }
    oracle::AttentionWeights w;
    w.dim = C;
    w.heads = a.heads();
    w.window = win;
    w.wq = vec(a.q().weight), w.bq = vec(a.q().bias);
    w.wk = vec(a.k().weight), w.bk = vec(a.k().bias);
    w.wv = vec(a.v().weight), w.bv = vec(a.v().bias);
    w.wp = vec(a.proj().weight), w.bp = vec(a.proj().bias);
    w.table = vec(a.bias_table());

    const auto x = oracle::random_tensor({1, 4, 6, 6, C}, seed + 10, false);
    const auto spec = WindowSpec::shifted(win);
    const auto h = cyclic_shift(x, spec.shift, 1);
    const auto wins = reshape(window_partition(h, spec), Shape{8, 18, C});
    const auto o = a.forward(wins, attention_mask<double>(dims, spec), {});
    const auto y =
        cyclic_shift(window_reverse(reshape(o, Shape{8, 2, 3, 3, C}), spec, {1, 4, 6, 6}), spec.shift, -1);
    const auto ref = oracle::shifted_window_attention(vec(x), dims, w, spec.shift);
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(ref[i] - y.values()[i]));
  }
  return {worst < 1e-5, "max abs diff " + fmt("%.3g", worst) + " over 3 seeds, volume (4,6,6), window (2,3,3)"};
}

Outcome window_round_trip() {
  oracle::RefSplitMix g{2026};
  int exact = 0;
  for (int trial = 0; trial < 50; ++trial) {
    Triple win{}, dims{};
    for (int a = 0; a < 3; ++a) {
      win[a] = 1 + static_cast<std::int64_t>(g.next() % 4);
      dims[a] = win[a] * (1 + static_cast<std::int64_t>(g.next() % 3));
    }
    const auto B = 1 + static_cast<std::int64_t>(g.next() % 2), C = 1 + static_cast<std::int64_t>(g.next() % 5);
    const auto x = oracle::random_tensor({B, dims[0], dims[1], dims[2], C}, g.next(), false);
    const auto spec = WindowSpec::unshifted(win);
    const auto back = window_reverse(window_partition(x, spec), spec, {B, dims[0], dims[1], dims[2]});
    exact += back.shape() == x.shape() && vec(back) == vec(x);
  }
  return {exact == 50, std::to_string(exact) + "/50 configurations bit-exact"};
}

Outcome metric_oracles() {
  const auto pair = ConfusionMatrix::from_rows({{40, 10}, {20, 30}});
  const double k = cohen_kappa(pair), oa = overall_accuracy(pair);
  bool ok = std::abs(k - 0.4) < 1e-12 && std::abs(oa - 0.70) < 1e-12;
  oracle::RefSplitMix g{7};
  int checked = 0, violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto n = 2 + static_cast<std::int64_t>(g.next() % 7);
    ConfusionMatrix cm(n);
    std::vector<std::vector<double>> m(n, std::vector<double>(n));
    for (std::int64_t a = 0; a < n; ++a)
      for (std::int64_t b = 0; b < n; ++b) {
        const auto c = g.next() % (a == b ? 400 : 80);
        cm.add(a, b, c);
        m[a][b] = static_cast<double>(c);
      }
    if (cm.total() == 0) continue;
    const auto h = oracle::hand_metrics(m);
    const double o = overall_accuracy(cm);
    const double wr = weighted_average(per_class_prf(cm)).recall;
    bool good = std::abs(o - h.oa) < 1e-12 && std::abs(wr - o) < 1e-12;
    try {
      const double kk = cohen_kappa(cm);
      good = good && kk <= o + 1e-12 && std::abs(kk - h.kappa) < 1e-12;
    } catch (const Error&) {
    }
    violations += !good;
    ++checked;
  }
  ok = ok && violations == 0 && checked > 990;
  return {ok, "kappa " + fmt("%.15g", k) + ", OA " + fmt("%.15g", oa) + "; " + std::to_string(violations) +
                  " violations over " + std::to_string(checked) + " random matrices"};
}

Outcome overfit() {
  const auto tiles = synth_split(8, 1.0, 0.0, Split::Train, "overfit");
  SegmentationModel<float> model(ModelConfig::tiny(), 3);
  TrainConfig cfg;
  cfg.epochs = 75;
  cfg.seed = 5;
  const auto t0 = Clock::now();
  const auto r = fit(model, tiles, {}, cfg);
  const double s = seconds_since(t0);
  const bool ok = r.global_step <= 300 && r.final_train_oa >= 0.98 && s < 600.0;
  return {ok, std::to_string(tiles.size()) + " tiles, " + std::to_string(r.global_step) + " steps, train OA " +
                  fmt("%.4f", r.final_train_oa) + ", " + fmt("%.0f", s) + " s"};
}

Outcome generalization() {
  const auto train = synth_split(80, 0.8, 0.2, Split::Train, "gen");
  const auto val = synth_split(80, 0.8, 0.2, Split::Val, "gen");
  SegmentationModel<float> model(ModelConfig::tiny(), 3);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.seed = 5;
  FitOptions o;
  o.final_train_eval = false;
  const auto t0 = Clock::now();
  fit(model, train, val, cfg, o);
  const auto cm = evaluate(model, val, 1);
  const double s = seconds_since(t0);
  const double oa = overall_accuracy(cm), kappa = cohen_kappa(cm);
  const bool ok = train.size() == 64 && val.size() == 16 && oa >= 0.85 && kappa >= 0.80 && s < 1800.0;
  return {ok, std::to_string(train.size()) + "/" + std::to_string(val.size()) + " tiles, 30 epochs, val OA " +
                  fmt("%.4f", oa) + ", kappa " + fmt("%.4f", kappa) + ", " + fmt("%.0f", s) + " s"};
}

Outcome determinism() {
  const auto tiles = synth_split(8, 1.0, 0.0, Split::Train, "det");
  auto run = [&] {
    SegmentationModel<float> model(ModelConfig::tiny(), 3);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.seed = 5;
    FitOptions o;
    o.stop_after_steps = 5;
    o.final_train_eval = false;
    const auto r = fit(model, tiles, {}, cfg, o);
    return std::make_pair(r.step_losses, encode_checkpoint(r.last));
  };
  const auto a = run(), b = run();
  const bool losses = a.first.size() == 5 && a.first == b.first;
  const bool bytes = a.second == b.second;
  return {losses && bytes, std::string("5-step losses ") + (losses ? "identical" : "differ") + ", checkpoints (" +
                               std::to_string(a.second.size()) + " bytes) " + (bytes ? "identical" : "differ")};
}

Outcome formats() {
  const auto dir = workdir("formats");
  fs::create_directories(dir);
  SynthOptions so;
  SplitMix64 rng(9);
  int tile_ok = 0;
  for (int i = 0; i < 5; ++i) {
    const auto t = synth_tile(so, rng);
    save_tile(t, dir / "t.sit");
    const auto back = load_tile(dir / "t.sit");
    tile_ok += back == t && encode_tile(back) == encode_tile(t);
  }

  const auto tiles = synth_split(4, 1.0, 0.0, Split::Train, "formats_data");
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 5;
  FitOptions quiet;
  quiet.final_train_eval = false;
  SegmentationModel<float> whole(ModelConfig::tiny(), 3);
  const auto full = fit(whole, tiles, {}, cfg, quiet);

  SegmentationModel<float> first(ModelConfig::tiny(), 3);
  auto part_opts = quiet;
  part_opts.stop_after_steps = 3;
  const auto part = fit(first, tiles, {}, cfg, part_opts);
  save_checkpoint(part.last, dir / "part.ckpt");
  const auto stored = load_checkpoint(dir / "part.ckpt");
  const bool ckpt_ok = stored == part.last && encode_checkpoint(stored) == encode_checkpoint(part.last);

  SegmentationModel<float> resumed(ModelConfig::tiny(), 77);
  auto resume_opts = quiet;
  resume_opts.resume = &stored;
  resume_opts.stop_after_steps = 1;
  const auto next = fit(resumed, tiles, {}, cfg, resume_opts);
  const bool resume_ok = next.step_losses.size() == 1 && full.step_losses.size() > 3 &&
                         next.step_losses[0] == full.step_losses[3];
  fs::remove_all(dir);
  return {tile_ok == 5 && ckpt_ok && resume_ok,
          std::to_string(tile_ok) + "/5 tiles bit-exact, checkpoint " + (ckpt_ok ? "bit-exact" : "differs") +
              ", resumed step-4 loss " + (resume_ok ? "identical" : "differs") + " (" +
              fmt("%.9g", next.step_losses.empty() ? NAN : next.step_losses[0]) + ")"};
}

Outcome scheduler_endpoints() {
  double worst = 0.0;
  for (const std::int64_t n : {2, 100, 9600})
    for (const auto& [hi, lo] : {std::pair{0.01, 0.0}, std::pair{0.1, 0.001}}) {
      worst = std::max(worst, std::abs(cosine_lr(0, n, hi, lo) - hi));
      worst = std::max(worst, std::abs(cosine_lr(n / 2, n, hi, lo) - (hi + lo) / 2));
      worst = std::max(worst, std::abs(cosine_lr(n, n, hi, lo) - lo));
    }
  return {worst < 1e-12, "max deviation " + fmt("%.3g", worst) + " at step 0 / mid / end"};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "shape contract", shape_contract},
      {2, "architecture counts", architecture_counts},
      {3, "gradient suite", gradient_suite},
      {4, "shifted-window oracle", shifted_window_oracle},
      {5, "window round trip", window_round_trip},
      {6, "metric oracles", metric_oracles},
      {7, "overfit", overfit},
      {8, "generalization", generalization},
      {9, "determinism", determinism},
      {10, "formats and resume", formats},
      {11, "scheduler endpoints", scheduler_endpoints},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.passed;
    std::printf("%s criterion %2d  %-22s %s\n", o.passed ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
