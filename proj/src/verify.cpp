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

#include "swinsits/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "swinsits/decoder.hpp"
#include "swinsits/metrics.hpp"
#include "swinsits/swin.hpp"

namespace swinsits {

namespace {

using Td = Tensor<double>;
using LossFn = std::function<Td()>;

constexpr double kStep32 = 1e-6;
constexpr double kFloor = 1e-7;
constexpr double kFloor32 = 1e-5;
constexpr double kTol64 = 1e-5;
constexpr double kTol32 = 1e-3;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double rel_error(double analytic, double numeric) {
  return std::fabs(analytic - numeric) / (std::fabs(analytic) + kFloor);
}

// Smooth graphs take the five-point stencil at a wide step; graphs with
// leaky_relu kinks at data-dependent points need a narrow two-point one.
enum class Stencil { Smooth, Kinked };

double central_difference(const std::function<double(double)>& f, Stencil st) {
  if (st == Stencil::Kinked) {
    constexpr double h = 1e-6;
    return (f(h) - f(-h)) / (2 * h);
  }
  constexpr double h = 1e-3;
  return (f(-2 * h) - 8 * f(-h) + 8 * f(h) - f(2 * h)) / (12 * h);
}

Td random_tensor(Shape shape, SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
  Td t(std::move(shape));
  for (auto& v : t.mutable_values()) v = lo + (hi - lo) * rng.uniform();
  return t;
}

// Values bounded away from 0 so kinked ops are differentiable at every probe.
Td random_away_from_zero(Shape shape, SplitMix64& rng) {
  Td t(std::move(shape));
  for (auto& v : t.mutable_values()) {
    const double m = 0.1 + 0.9 * rng.uniform();
    v = rng.uniform() < 0.5 ? -m : m;
  }
  return t;
}

// sum(out * R) for a fixed random R, so every output entry matters.
Td weighted_sum(const Td& out, std::uint64_t seed) {
  SplitMix64 rng(seed);
  return sum(mul(out, random_tensor(out.shape(), rng)));
}

// Largest relative error between backward() and central differences over
// up to `per_input` entries of each input.
double fd_max_error(const std::vector<Td>& inputs, const LossFn& loss_fn, SplitMix64& rng,
                    std::size_t per_input = 16, Stencil stencil = Stencil::Smooth) {
  std::vector<Td> xs = inputs;
  for (auto& x : xs) {
    x.set_requires_grad(true);
    x.zero_grad();
  }
  backward(loss_fn());
  double worst = 0.0;
  NoGradGuard guard;
  for (auto& x : xs) {
    const std::vector<double> g = x.has_grad() ? std::vector<double>(x.grad().begin(), x.grad().end())
                                               : std::vector<double>(static_cast<std::size_t>(x.numel()), 0.0);
    const auto n = static_cast<std::size_t>(x.numel());
    std::vector<std::size_t> probe;
    if (n <= per_input) {
      for (std::size_t i = 0; i < n; ++i) probe.push_back(i);
    } else {
      for (std::size_t k = 0; k < per_input; ++k) probe.push_back(static_cast<std::size_t>(rng.below(n)));
    }
    auto v = x.mutable_values();
    for (auto i : probe) {
      const double orig = v[i];
      const double numeric = central_difference(
          [&](double dx) {
            v[i] = orig + dx;
            return loss_fn().item();
          },
          stencil);
      v[i] = orig;
      worst = std::max(worst, rel_error(g[i], numeric));
    }
    x.zero_grad();
  }
  return worst;
}

std::vector<Td> with_params(Td x, const ParameterSet<double>& params) {
  std::vector<Td> v{std::move(x)};
  for (const auto& p : params.items()) v.push_back(p.tensor);
  return v;
}

struct GradCase {
  std::string name;
  std::function<double(SplitMix64&)> run;  // returns max relative error
};

std::vector<GradCase> op_cases() {
  std::vector<GradCase> c;
  auto simple = [&](std::string name, std::vector<Shape> shapes, std::function<Td(const std::vector<Td>&)> f,
                    bool away = false) {
    c.push_back({std::move(name), [shapes, f, away](SplitMix64& rng) {
                   std::vector<Td> in;
                   for (const auto& s : shapes) in.push_back(away ? random_away_from_zero(s, rng) : random_tensor(s, rng));
                   const auto seed = rng.next();
                   return fd_max_error(in, [&] { return weighted_sum(f(in), seed); }, rng);
                 }});
  };
  simple("add", {{2, 3, 4}, {2, 3, 4}}, [](const auto& v) { return add(v[0], v[1]); });
  simple("mul", {{2, 3, 4}, {2, 3, 4}}, [](const auto& v) { return mul(v[0], v[1]); });
  simple("scale", {{3, 5}}, [](const auto& v) { return scale(v[0], 1.7); });
  simple("add_suffix", {{2, 3, 4}, {3, 4}}, [](const auto& v) { return add_suffix(v[0], v[1]); });
  simple("sum", {{4, 5}}, [](const auto& v) { return scale(sum(v[0]), 0.5); });
  simple("reshape", {{2, 3, 4}}, [](const auto& v) { return reshape(v[0], Shape{4, 6}); });
  simple("permute", {{2, 3, 4}}, [](const auto& v) { return permute(v[0], {2, 0, 1}); });
  simple("transpose_last2", {{2, 3, 4}}, [](const auto& v) { return transpose_last2(v[0]); });
  simple("concat", {{2, 3, 4}, {2, 2, 4}}, [](const auto& v) { return concat(std::vector<Td>{v[0], v[1]}, 1); });
  simple("matmul", {{2, 3, 4, 5}, {3, 5, 2}}, [](const auto& v) { return matmul(v[0], v[1]); });
  simple("matmul_2d_rhs", {{2, 3, 4}, {4, 5}}, [](const auto& v) { return matmul(v[0], v[1]); });
  simple("linear", {{2, 3, 4}, {4, 5}, {5}}, [](const auto& v) { return linear(v[0], v[1], v[2]); });
  simple("softmax_last", {{3, 7}}, [](const auto& v) { return softmax_last(v[0]); });
  simple("layer_norm", {{3, 4, 6}, {6}, {6}}, [](const auto& v) { return layer_norm(v[0], v[1], v[2], 1e-5); });
  simple("layer_norm_plain", {{3, 6}}, [](const auto& v) { return layer_norm(v[0], Td(), Td(), 1e-5); });
  simple("instance_norm", {{2, 3, 4, 3, 2}}, [](const auto& v) { return instance_norm(v[0], 1e-5); });
  simple("gelu", {{3, 8}}, [](const auto& v) { return gelu(v[0]); });
  simple("leaky_relu", {{3, 8}}, [](const auto& v) { return leaky_relu(v[0], 0.01); }, true);
  simple("dropout", {{4, 6}}, [](const auto& v) {
    SplitMix64 r(99);
    return dropout(v[0], 0.3, r);
  });
  simple("conv3d", {{2, 3, 4, 5, 4}, {4, 3, 3, 3, 3}, {4}},
         [](const auto& v) { return conv3d(v[0], v[1], v[2], Triple{1, 2, 1}, Triple{1, 1, 0}); });
  simple("conv3d_pointwise", {{1, 3, 2, 3, 3}, {2, 3, 1, 1, 1}},
         [](const auto& v) { return conv3d(v[0], v[1], Td(), Triple{1, 1, 1}, Triple{0, 0, 0}); });
  simple("conv3d_transpose", {{1, 3, 2, 2, 3}, {3, 2, 2, 2, 2}},
         [](const auto& v) { return conv3d_transpose(v[0], v[1], Triple{2, 2, 2}); });
  simple("roll3", {{1, 3, 4, 5, 2}}, [](const auto& v) { return roll3(v[0], Triple{1, -2, 3}); });
  simple("gather_rows", {{7, 3}}, [](const auto& v) {
    return gather_rows(v[0], std::vector<std::int64_t>{0, 3, 3, 6, 1, 0});
  });
  c.push_back({"cross_entropy", [](SplitMix64& rng) {
                 std::vector<Td> in{random_tensor({2, 5, 3, 3}, rng, -2.0, 2.0)};
                 std::vector<std::int32_t> labels(18);
                 for (auto& l : labels) l = static_cast<std::int32_t>(rng.below(5));
                 labels[4] = 255;
                 return fd_max_error(in, [&] { return cross_entropy(in[0], std::span<const std::int32_t>(labels), 255); },
                                     rng);
               }});
  return c;
}

std::vector<GradCase> block_cases() {
  std::vector<GradCase> c;
  c.push_back({"window_attention_masked", [](SplitMix64& rng) {
                 ParameterSet<double> ps;
                 WindowAttention<double> attn(ps, "attn", 8, 2, Triple{2, 3, 3}, 0.0, 0.0, rng);
                 for (auto& p : ps.items())  // biases and tables start at zero; perturb them
                   for (auto& v : p.tensor.mutable_values()) v += 0.05 * rng.normal();
                 const auto spec = WindowSpec::shifted({2, 3, 3}).clamped_to({4, 6, 6});
                 const auto mask = attention_mask<double>({4, 6, 6}, spec);
                 auto in = with_params(random_tensor({8, 18, 8}, rng), ps);
                 const auto seed = rng.next();
                 return fd_max_error(in, [&] { return weighted_sum(attn.forward(in[0], mask, {}), seed); }, rng, 8);
               }});
  c.push_back({"swin_block_shifted", [](SplitMix64& rng) {
                 ParameterSet<double> ps;
                 SwinBlock<double> blk(ps, "blk", 8, 2, Triple{2, 3, 3}, true, 2, 0.0, 0.0, rng);
                 for (auto& p : ps.items())
                   for (auto& v : p.tensor.mutable_values()) v += 0.05 * rng.normal();
                 auto in = with_params(random_tensor({1, 4, 6, 6, 8}, rng), ps);
                 const auto seed = rng.next();
                 return fd_max_error(in, [&] { return weighted_sum(blk.forward(in[0], {}), seed); }, rng, 6);
               }});
  c.push_back({"patch_merging", [](SplitMix64& rng) {
                 ParameterSet<double> ps;
                 PatchMerging<double> pm(ps, "merge", 4, rng);
                 for (auto& p : ps.items())
                   for (auto& v : p.tensor.mutable_values()) v += 0.05 * rng.normal();
                 auto in = with_params(random_tensor({1, 2, 4, 4, 4}, rng), ps);
                 const auto seed = rng.next();
                 return fd_max_error(in, [&] { return weighted_sum(pm.forward(in[0]), seed); }, rng, 8);
               }});
  c.push_back({"residual_block", [](SplitMix64& rng) {
                 ParameterSet<double> ps;
                 ResidualBlock<double> rb(ps, "res", 3, 4, rng);
                 auto in = with_params(random_tensor({1, 3, 4, 4, 4}, rng), ps);
                 const auto seed = rng.next();
                 return fd_max_error(in, [&] { return weighted_sum(rb.forward(in[0]), seed); }, rng, 8,
                                     Stencil::Kinked);
               }});
  c.push_back({"up_concat", [](SplitMix64& rng) {
                 ParameterSet<double> ps;
                 UpConcat<double> up(ps, "up", 4, 3, 3, rng);
                 auto in = with_params(random_tensor({1, 4, 2, 2, 2}, rng), ps);
                 in.push_back(random_tensor({1, 3, 4, 4, 4}, rng));
                 const auto seed = rng.next();
                 return fd_max_error(in, [&] { return weighted_sum(up.forward(in[0], in.back()), seed); },
                                     rng, 8, Stencil::Kinked);
               }});
  c.push_back({"temporal_head", [](SplitMix64& rng) {
                 ParameterSet<double> ps;
                 TemporalCollapseHead<double> head(ps, "head", 3, 4, 5, rng);
                 auto in = with_params(random_tensor({1, 3, 4, 4, 4}, rng), ps);
                 const auto seed = rng.next();
                 return fd_max_error(in, [&] { return weighted_sum(head.forward(in[0]), seed); }, rng, 8);
               }});
  return c;
}

// Float model gradients against central differences of a double copy.
// The tiny preset shrunk to a 16x16 tile; a 3-wide window cannot tile the
// 2x2 stage-2 map, so the window drops to 2x2x2.
ModelConfig gradcheck_config() {
  ModelConfig cfg = ModelConfig::tiny();
  cfg.height = 16;
  cfg.width = 16;
  cfg.window = {2, 2, 2};
  return cfg;
}

double end_to_end_error(SplitMix64& rng, std::size_t samples) {
  const ModelConfig cfg = gradcheck_config();
  const auto seed = rng.next();
  SegmentationModel<float> mf(cfg, seed);
  SegmentationModel<double> md(cfg, seed);
  md.copy_values_from(mf);
  const Shape in_shape{1, cfg.in_channels, cfg.time_steps, cfg.height, cfg.width};
  Td xd = random_tensor(in_shape, rng, 0.0, 1.0);
  const auto xf = cast<float>(xd);
  std::vector<std::int32_t> labels(static_cast<std::size_t>(cfg.height * cfg.width));
  for (auto& l : labels) l = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(cfg.num_classes)));

  mf.parameters().zero_grad();
  backward(cross_entropy(mf.forward(xf), std::span<const std::int32_t>(labels), 255));
  auto& fitems = mf.parameters().items();
  double worst = 0.0;
  NoGradGuard guard;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto& fp = fitems[static_cast<std::size_t>(rng.below(fitems.size()))];
    const auto i = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(fp.tensor.numel())));
    const double analytic = fp.tensor.has_grad() ? fp.tensor.grad()[i] : 0.0;
    auto dt = md.parameters().find(fp.name);
    auto v = dt.mutable_values();
    const double orig = v[i];
    v[i] = orig + kStep32;
    const double lp = cross_entropy(md.forward(xd), std::span<const std::int32_t>(labels), 255).item();
    v[i] = orig - kStep32;
    const double lm = cross_entropy(md.forward(xd), std::span<const std::int32_t>(labels), 255).item();
    v[i] = orig;
    const double numeric = (lp - lm) / (2 * kStep32);
    // The double oracle's own roundoff sits near 1e-9; gradients below kFloor32 are judged absolutely.
    worst = std::max(worst, std::fabs(analytic - numeric) /
                                std::max({std::fabs(analytic), std::fabs(numeric), kFloor32}));
  }
  mf.parameters().zero_grad();
  return worst;
}

std::uint64_t name_hash(const std::string& name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : name) h = (h ^ ch) * 0x100000001b3ULL;
  return h;
}

void gradcheck_suite(std::vector<CheckResult>& out) {
  const std::uint64_t seeds[] = {1, 2, 3};
  auto cases = op_cases();
  auto blocks = block_cases();
  cases.insert(cases.end(), blocks.begin(), blocks.end());
  for (const auto& gc : cases) {
    double worst = 0.0;
    for (auto s : seeds) {
      SplitMix64 rng(mix_seed(s, name_hash(gc.name)));
      worst = std::max(worst, gc.run(rng));
    }
    out.push_back({"gradcheck/" + gc.name, worst < kTol64, "max rel err " + fmt("%.3g", worst) + " (3 seeds, 64-bit)"});
  }
  double worst = 0.0;
  for (auto s : seeds) {
    SplitMix64 rng(mix_seed(s, 4242));
    worst = std::max(worst, end_to_end_error(rng, 20));
  }
  out.push_back({"gradcheck/end_to_end_tiny_fp32", worst < kTol32,
                 "max rel err " + fmt("%.3g", worst) + " over 20 sampled parameters x 3 seeds, 16x16 tile"});
}

// ---------------------------------------------------------------------------
// Window suite

// Dense attention where token p sees q only inside the same rolled window and
// when the rolled displacement equals the true one (no wrap-around).
Td dense_shifted_attention(const WindowAttention<double>& attn, const Td& x, const WindowSpec& spec) {
  const std::int64_t D = x.dim(1), H = x.dim(2), W = x.dim(3), C = x.dim(4);
  const std::int64_t heads = attn.heads(), hd = C / heads;
  const Triple n{D, H, W};
  const auto xv = x.values();
  auto project = [&](const Linear<double>& l) {
    std::vector<double> out(static_cast<std::size_t>(D * H * W * C), 0.0);
    const auto w = l.weight.values();
    const auto b = l.bias.values();
    for (std::int64_t p = 0; p < D * H * W; ++p)
      for (std::int64_t o = 0; o < C; ++o) {
        double s = b[static_cast<std::size_t>(o)];
        for (std::int64_t i = 0; i < C; ++i) s += xv[static_cast<std::size_t>(p * C + i)] * w[static_cast<std::size_t>(i * C + o)];
        out[static_cast<std::size_t>(p * C + o)] = s;
      }
    return out;
  };
  const auto q = project(attn.q()), k = project(attn.k()), v = project(attn.v());
  const auto table = attn.bias_table().values();
  const auto win = spec.window;
  auto coords = [&](std::int64_t p) { return Triple{p / (H * W), (p / W) % H, p % W}; };
  auto rolled = [&](const Triple& c) {
    Triple r;
    for (int a = 0; a < 3; ++a) r[a] = ((c[a] - spec.shift[a]) % n[a] + n[a]) % n[a];
    return r;
  };
  const std::int64_t P = D * H * W;
  std::vector<double> mixed(static_cast<std::size_t>(P * C), 0.0);
  const double sc = 1.0 / std::sqrt(static_cast<double>(hd));
  for (std::int64_t p = 0; p < P; ++p) {
    const auto cp = coords(p), rp = rolled(cp);
    std::vector<std::int64_t> allowed;
    for (std::int64_t r = 0; r < P; ++r) {
      const auto cq = coords(r), rq = rolled(cq);
      bool ok = true;
      for (int a = 0; a < 3; ++a)
        ok = ok && rp[a] / win[a] == rq[a] / win[a] && rp[a] - rq[a] == cp[a] - cq[a];
      if (ok) allowed.push_back(r);
    }
    for (std::int64_t h = 0; h < heads; ++h) {
      std::vector<double> logits;
      for (auto r : allowed) {
        const auto rq = rolled(coords(r));
        double s = 0.0;
        for (std::int64_t e = 0; e < hd; ++e)
          s += q[static_cast<std::size_t>(p * C + h * hd + e)] * k[static_cast<std::size_t>(r * C + h * hd + e)];
        const std::int64_t dd = rp[0] % win[0] - rq[0] % win[0] + win[0] - 1;
        const std::int64_t dh = rp[1] % win[1] - rq[1] % win[1] + win[1] - 1;
        const std::int64_t dw = rp[2] % win[2] - rq[2] % win[2] + win[2] - 1;
        const std::int64_t idx = (dd * (2 * win[1] - 1) + dh) * (2 * win[2] - 1) + dw;
        logits.push_back(s * sc + table[static_cast<std::size_t>(idx * heads + h)]);
      }
      const double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (auto& l : logits) z += (l = std::exp(l - mx));
      for (std::size_t j = 0; j < allowed.size(); ++j)
        for (std::int64_t e = 0; e < hd; ++e)
          mixed[static_cast<std::size_t>(p * C + h * hd + e)] +=
              logits[j] / z * v[static_cast<std::size_t>(allowed[j] * C + h * hd + e)];
    }
  }
  Td out(Shape{1, D, H, W, C});
  auto ov = out.mutable_values();
  const auto pw = attn.proj().weight.values();
  const auto pb = attn.proj().bias.values();
  for (std::int64_t p = 0; p < P; ++p)
    for (std::int64_t o = 0; o < C; ++o) {
      double s = pb[static_cast<std::size_t>(o)];
      for (std::int64_t i = 0; i < C; ++i) s += mixed[static_cast<std::size_t>(p * C + i)] * pw[static_cast<std::size_t>(i * C + o)];
      ov[static_cast<std::size_t>(p * C + o)] = s;
    }
  return out;
}

Td library_shifted_attention(const WindowAttention<double>& attn, const Td& x, const WindowSpec& spec) {
  const std::int64_t D = x.dim(1), H = x.dim(2), W = x.dim(3), C = x.dim(4);
  auto h = cyclic_shift(x, spec.shift, 1);
  auto wins = window_partition(h, spec);
  wins = reshape(wins, Shape{wins.dim(0), spec.tokens(), C});
  auto a = attn.forward(wins, attention_mask<double>({D, H, W}, spec), {});
  a = window_reverse(reshape(a, Shape{a.dim(0), spec.window[0], spec.window[1], spec.window[2], C}), spec,
                     {1, D, H, W});
  return cyclic_shift(a, spec.shift, -1);
}

void windows_suite(std::vector<CheckResult>& out) {
  {
    SplitMix64 rng(2024);
    int exact = 0;
    for (int trial = 0; trial < 50; ++trial) {
      const Triple w{1 + static_cast<std::int64_t>(rng.below(3)), 1 + static_cast<std::int64_t>(rng.below(4)),
                     1 + static_cast<std::int64_t>(rng.below(4))};
      const std::int64_t B = 1 + static_cast<std::int64_t>(rng.below(2));
      const std::int64_t D = w[0] * (1 + static_cast<std::int64_t>(rng.below(3)));
      const std::int64_t H = w[1] * (1 + static_cast<std::int64_t>(rng.below(3)));
      const std::int64_t W = w[2] * (1 + static_cast<std::int64_t>(rng.below(3)));
      const std::int64_t C = 1 + static_cast<std::int64_t>(rng.below(5));
      const auto x = random_tensor({B, D, H, W, C}, rng);
      const auto spec = WindowSpec::unshifted(w);
      const auto back = window_reverse(window_partition(x, spec), spec, {B, D, H, W});
      if (std::equal(back.values().begin(), back.values().end(), x.values().begin())) ++exact;
    }
    out.push_back({"windows/partition_reverse_roundtrip", exact == 50, std::to_string(exact) + "/50 bit-exact"});
  }
  {
    SplitMix64 rng(7);
    const auto x = random_tensor({2, 4, 6, 6, 3}, rng);
    const auto back = cyclic_shift(cyclic_shift(x, Triple{1, 1, 1}, 1), Triple{1, 1, 1}, -1);
    out.push_back({"windows/cyclic_shift_roundtrip",
                   std::equal(back.values().begin(), back.values().end(), x.values().begin()), "bit-exact"});
  }
  {
    double worst = 0.0;
    for (std::uint64_t seed : {11u, 12u, 13u}) {
      SplitMix64 rng(seed);
      ParameterSet<double> ps;
      WindowAttention<double> attn(ps, "attn", 8, 2, Triple{2, 3, 3}, 0.0, 0.0, rng);
      for (auto& p : ps.items())
        for (auto& v : p.tensor.mutable_values()) v += 0.3 * rng.normal();
      const auto spec = WindowSpec::shifted({2, 3, 3}).clamped_to({4, 6, 6});
      const auto x = random_tensor({1, 4, 6, 6, 8}, rng);
      const auto a = library_shifted_attention(attn, x, spec);
      const auto b = dense_shifted_attention(attn, x, spec);
      for (std::size_t i = 0; i < a.values().size(); ++i)
        worst = std::max(worst, std::fabs(a.values()[i] - b.values()[i]));
    }
    out.push_back({"windows/shifted_attention_vs_dense", worst < 1e-5,
                   "max abs diff " + fmt("%.3g", worst) + " on (4,6,6), window (2,3,3)"});
  }
  {
    const auto spec = WindowSpec::shifted({2, 3, 3}).clamped_to({2, 6, 6});
    out.push_back({"windows/shift_clamped_on_full_axis", spec.shift == Triple{0, 1, 1},
                   "window spanning the whole time axis drops its shift"});
  }
}

// ---------------------------------------------------------------------------
// Metrics suite

void metrics_suite(std::vector<CheckResult>& out) {
  const auto cm = ConfusionMatrix::from_rows({{40, 10}, {20, 30}});
  const double oa = overall_accuracy(cm), kappa = cohen_kappa(cm);
  out.push_back({"metrics/oa_hand_value", std::fabs(oa - 0.70) < 1e-12, "OA = " + fmt("%.15g", oa)});
  out.push_back({"metrics/kappa_hand_value", std::fabs(kappa - 0.4) < 1e-12, "kappa = " + fmt("%.15g", kappa)});
  const auto prf = per_class_prf(cm);
  const bool prf_ok = std::fabs(prf[0].precision - 40.0 / 60.0) < 1e-12 && std::fabs(prf[0].recall - 0.8) < 1e-12 &&
                      std::fabs(prf[0].f1 - 2 * (2.0 / 3.0) * 0.8 / (2.0 / 3.0 + 0.8)) < 1e-12;
  out.push_back({"metrics/per_class_hand_values", prf_ok,
                 "class 0 P=" + fmt("%.4f", prf[0].precision) + " R=" + fmt("%.4f", prf[0].recall) +
                     " F1=" + fmt("%.4f", prf[0].f1)});
  const auto avg = weighted_average(prf);
  out.push_back({"metrics/weighted_precision", std::fabs(avg.precision - (40.0 / 60.0 + 30.0 / 40.0) / 2) < 1e-12,
                 "weighted P = " + fmt("%.4f", avg.precision)});
  const auto even = ConfusionMatrix::from_rows({{25, 25}, {25, 25}});
  out.push_back({"metrics/chance_agreement", std::fabs(cohen_kappa(even)) < 1e-12 &&
                                                 std::fabs(overall_accuracy(even) - 0.5) < 1e-12,
                 "kappa = 0 and OA = 0.5"});

  SplitMix64 rng(31337);
  int kappa_le_oa = 0, recall_eq_oa = 0, scale_inv = 0, tested = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto K = 2 + static_cast<std::int64_t>(rng.below(6));
    ConfusionMatrix m(K), scaled(K);
    for (std::int64_t a = 0; a < K; ++a)
      for (std::int64_t p = 0; p < K; ++p) {
        const auto v = rng.below(50) + (a == p ? rng.below(100) : 0);
        m.add(a, p, v);
        scaled.add(a, p, 3 * v);
      }
    if (m.total() == 0) continue;
    ++tested;
    const double o = overall_accuracy(m);
    double kap = 0.0;
    try {
      kap = cohen_kappa(m);
    } catch (const Error&) {
      ++kappa_le_oa;
      ++scale_inv;
      kap = std::nan("");
    }
    if (!std::isnan(kap)) {
      if (kap <= o + 1e-12) ++kappa_le_oa;
      if (std::fabs(cohen_kappa(scaled) - kap) < 1e-12) ++scale_inv;
    }
    double wr = 0.0, s = 0.0;
    for (const auto& c : per_class_prf(m)) {
      wr += c.recall * static_cast<double>(c.support);
      s += static_cast<double>(c.support);
    }
    if (std::fabs(wr / s - o) < 1e-12) ++recall_eq_oa;
  }
  out.push_back({"metrics/kappa_at_most_oa", kappa_le_oa == tested,
                 std::to_string(kappa_le_oa) + "/" + std::to_string(tested) + " random matrices"});
  out.push_back({"metrics/weighted_recall_equals_oa", recall_eq_oa == tested,
                 std::to_string(recall_eq_oa) + "/" + std::to_string(tested) + " random matrices"});
  out.push_back({"metrics/kappa_scale_invariant", scale_inv == tested,
                 std::to_string(scale_inv) + "/" + std::to_string(tested) + " random matrices"});
}

}  // namespace

std::vector<std::string> verify_suites() { return {"gradcheck", "windows", "metrics", "all"}; }

std::vector<CheckResult> run_verify(const std::string& suite, const CheckSink& sink) {
  const auto names = verify_suites();
  SWINSITS_CHECK(std::find(names.begin(), names.end(), suite) != names.end(), ErrorKind::Config,
                 "unknown suite '", suite, "' (expected gradcheck, windows, metrics or all)");
  std::vector<CheckResult> out;
  auto run = [&](void (*fn)(std::vector<CheckResult>&)) {
    const std::size_t start = out.size();
    fn(out);
    if (sink)
      for (std::size_t i = start; i < out.size(); ++i) sink(out[i]);
  };
  if (suite == "metrics" || suite == "all") run(metrics_suite);
  if (suite == "windows" || suite == "all") run(windows_suite);
  if (suite == "gradcheck" || suite == "all") run(gradcheck_suite);
  return out;
}

}  // namespace swinsits
