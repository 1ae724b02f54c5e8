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

#include "swinsits/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "blas.hpp"

namespace swinsits {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension error";
    case ErrorKind::Parameter: return "parameter error";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Range: return "range error";
    case ErrorKind::Degenerate: return "degenerate input";
    case ErrorKind::Graph: return "graph error";
    case ErrorKind::Io: return "I/O error";
    case ErrorKind::Palette: return "palette error";
    case ErrorKind::Unsupported: return "unsupported configuration";
  }
  return "error";
}

std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

std::int64_t numel_of(const Shape& shape) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

namespace {

void check_shape(const Shape& shape) {
  for (auto e : shape)
    SWINSITS_CHECK(e > 0, ErrorKind::Dimension, "tensor extents must be positive, got ",
                   shape_str(shape));
}

thread_local bool t_grad_enabled = true;

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

template <typename T>
Tensor<T>::Tensor(Shape shape, bool requires_grad) : impl_(std::make_shared<TensorImpl<T>>()) {
  check_shape(shape);
  impl_->data.assign(static_cast<std::size_t>(numel_of(shape)), T(0));
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad)
    : impl_(std::make_shared<TensorImpl<T>>()) {
  check_shape(shape);
  SWINSITS_CHECK(numel_of(shape) == static_cast<std::int64_t>(values.size()), ErrorKind::Dimension,
                 "shape ", shape_str(shape), " does not match ", values.size(), " values");
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
  impl_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <typename T>
std::int64_t Tensor<T>::dim(std::int64_t axis) const {
  const auto r = rank();
  if (axis < 0) axis += r;
  SWINSITS_CHECK(axis >= 0 && axis < r, ErrorKind::Dimension, "axis ", axis, " out of range for ",
                 shape_str(shape()));
  return impl_->shape[static_cast<std::size_t>(axis)];
}

template <typename T>
T Tensor<T>::item() const {
  SWINSITS_CHECK(numel() == 1, ErrorKind::Dimension, "item() needs a single value, shape is ",
                 shape_str(shape()));
  return impl_->data[0];
}

template <typename T>
T Tensor<T>::at(std::initializer_list<std::int64_t> index) const {
  SWINSITS_CHECK(static_cast<std::int64_t>(index.size()) == rank(), ErrorKind::Dimension,
                 "index rank mismatch for ", shape_str(shape()));
  std::int64_t off = 0;
  std::size_t i = 0;
  for (auto v : index) {
    const auto e = impl_->shape[i++];
    SWINSITS_CHECK(v >= 0 && v < e, ErrorKind::Range, "index out of range for ", shape_str(shape()));
    off = off * e + v;
  }
  return impl_->data[static_cast<std::size_t>(off)];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool flag) {
  impl_->requires_grad = flag;
  return *this;
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T(0));
  return impl_->grad;
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(impl_->shape, impl_->data, false);
}

template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& x, bool requires_grad) {
  std::vector<To> out(x.values().begin(), x.values().end());
  return Tensor<To>(x.shape(), std::move(out), requires_grad);
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> cast<float, double>(const Tensor<double>&, bool);
template Tensor<double> cast<double, float>(const Tensor<float>&, bool);
template Tensor<float> cast<float, float>(const Tensor<float>&, bool);
template Tensor<double> cast<double, double>(const Tensor<double>&, bool);

// ---------------------------------------------------------------------------
// Tape

Tape& Tape::current() {
  thread_local Tape tape;
  return tape;
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

template <typename T>
void backward(const Tensor<T>& loss) {
  SWINSITS_CHECK(loss.defined() && loss.numel() == 1, ErrorKind::Dimension,
                 "backward needs a scalar loss, got ",
                 loss.defined() ? shape_str(loss.shape()) : std::string("undefined"));
  auto& tape = Tape::current();
  const auto& entries = tape.entries();
  std::size_t end = entries.size();
  while (end > 0 && entries[end - 1].output != loss.id()) --end;
  SWINSITS_CHECK(end > 0, ErrorKind::Graph,
                 "loss was not produced by a recorded op or its graph was already consumed");
  auto& impl = *loss.impl();
  if (impl.grad.empty()) impl.grad.assign(1, T(0));
  impl.grad[0] += T(1);
  for (std::size_t i = end; i-- > 0;) entries[i].backward();
  tape.clear();
}

template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);

// ---------------------------------------------------------------------------
// Op helpers

struct TensorAccess {
  template <typename T>
  static Tensor<T> wrap(std::shared_ptr<TensorImpl<T>> impl) {
    return Tensor<T>(std::move(impl));
  }
};

namespace {

template <typename T>
using ImplPtr = std::shared_ptr<TensorImpl<T>>;

template <typename T>
bool tracks(const Tensor<T>& t) {
  return t.defined() && t.requires_grad();
}

template <typename T, typename... Ts>
bool needs_grad(const Ts&... ins) {
  return t_grad_enabled && (tracks<T>(ins) || ...);
}

template <typename T>
Tensor<T> make_output(Shape shape, std::vector<T> data, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return TensorAccess::wrap(std::move(impl));
}

template <typename T>
std::vector<T>& grad_of(TensorImpl<T>& t) {
  if (t.grad.empty()) t.grad.assign(t.data.size(), T(0));
  return t.grad;
}

template <typename T>
void record(const char* op, std::vector<const void*> inputs, const Tensor<T>& out,
            std::function<void()> fn) {
  Tape::current().record(TapeEntry{op, std::move(inputs), out.id(), std::move(fn)});
}

void check_finite_scalar(double v, const char* what) {
  SWINSITS_CHECK(std::isfinite(v), ErrorKind::Parameter, what, " must be finite");
}

// Odometer over `shape`, yielding (linear output index, strided input offset).
template <typename F>
void for_each_strided(const Shape& shape, const std::vector<std::int64_t>& strides, F&& fn) {
  const std::size_t r = shape.size();
  if (r == 0) {
    fn(std::int64_t{0}, std::int64_t{0});
    return;
  }
  const std::int64_t inner = shape[r - 1];
  const std::int64_t inner_stride = strides[r - 1];
  std::vector<std::int64_t> idx(r, 0);
  std::int64_t base = 0;
  std::int64_t lin = 0;
  const std::int64_t total = numel_of(shape);
  while (lin < total) {
    std::int64_t off = base;
    for (std::int64_t i = 0; i < inner; ++i, off += inner_stride) fn(lin++, off);
    for (std::size_t ax = r - 1; ax-- > 0;) {
      base += strides[ax];
      if (++idx[ax] < shape[ax]) break;
      base -= strides[ax] * shape[ax];
      idx[ax] = 0;
    }
  }
}

std::vector<std::int64_t> row_major_strides(const Shape& shape) {
  std::vector<std::int64_t> s(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  SWINSITS_CHECK(a.shape() == b.shape(), ErrorKind::Dimension, "add: shape mismatch ",
                 shape_str(a.shape()), " vs ", shape_str(b.shape()));
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  const bool rg = needs_grad<T>(a, b);
  auto y = make_output<T>(a.shape(), std::move(out), rg);
  if (rg) {
    ImplPtr<T> ai = a.impl(), bi = b.impl(), yi = y.impl();
    record<T>("add", {ai.get(), bi.get()}, y, [ai, bi, yi] {
      if (yi->grad.empty()) return;
      for (auto* t : {ai.get(), bi.get()}) {
        if (!t->requires_grad) continue;
        auto& g = grad_of(*t);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += yi->grad[i];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  SWINSITS_CHECK(a.shape() == b.shape(), ErrorKind::Dimension, "mul: shape mismatch ",
                 shape_str(a.shape()), " vs ", shape_str(b.shape()));
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const bool rg = needs_grad<T>(a, b);
  auto y = make_output<T>(a.shape(), std::move(out), rg);
  if (rg) {
    ImplPtr<T> ai = a.impl(), bi = b.impl(), yi = y.impl();
    record<T>("mul", {ai.get(), bi.get()}, y, [ai, bi, yi] {
      if (yi->grad.empty()) return;
      const auto& gy = yi->grad;
      if (ai->requires_grad) {
        auto& g = grad_of(*ai);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i] * bi->data[i];
      }
      if (bi->requires_grad) {
        auto& g = grad_of(*bi);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i] * ai->data[i];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  const auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * factor;
  const bool rg = needs_grad<T>(x);
  auto y = make_output<T>(x.shape(), std::move(out), rg);
  if (rg) {
    ImplPtr<T> xi = x.impl(), yi = y.impl();
    record<T>("scale", {xi.get()}, y, [xi, yi, factor] {
      if (yi->grad.empty()) return;
      auto& g = grad_of(*xi);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += yi->grad[i] * factor;
    });
  }
  return y;
}

template <typename T>
Tensor<T> add_suffix(const Tensor<T>& x, const Tensor<T>& b) {
  const auto& xs = x.shape();
  const auto& bs = b.shape();
  bool ok = bs.size() <= xs.size();
  for (std::size_t i = 0; ok && i < bs.size(); ++i)
    ok = bs[bs.size() - 1 - i] == xs[xs.size() - 1 - i];
  SWINSITS_CHECK(ok, ErrorKind::Dimension, "add_suffix: ", shape_str(bs),
                 " is not a suffix of ", shape_str(xs));
  const auto n = static_cast<std::size_t>(b.numel());
  const auto xv = x.values();
  const auto bv = b.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); i += n)
    for (std::size_t j = 0; j < n; ++j) out[i + j] = xv[i + j] + bv[j];
  const bool rg = needs_grad<T>(x, b);
  auto y = make_output<T>(xs, std::move(out), rg);
  if (rg) {
    ImplPtr<T> xi = x.impl(), bi = b.impl(), yi = y.impl();
    record<T>("add_suffix", {xi.get(), bi.get()}, y, [xi, bi, yi, n] {
      if (yi->grad.empty()) return;
      const auto& gy = yi->grad;
      if (xi->requires_grad) {
        auto& g = grad_of(*xi);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i];
      }
      if (bi->requires_grad) {
        std::vector<double> acc(n, 0.0);
        for (std::size_t i = 0; i < gy.size(); i += n)
          for (std::size_t j = 0; j < n; ++j) acc[j] += gy[i + j];
        auto& g = grad_of(*bi);
        for (std::size_t j = 0; j < n; ++j) g[j] += static_cast<T>(acc[j]);
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  double acc = 0;
  for (auto v : x.values()) acc += v;
  const bool rg = needs_grad<T>(x);
  auto y = make_output<T>(Shape{1}, std::vector<T>{static_cast<T>(acc)}, rg);
  if (rg) {
    ImplPtr<T> xi = x.impl(), yi = y.impl();
    record<T>("sum", {xi.get()}, y, [xi, yi] {
      if (yi->grad.empty()) return;
      auto& g = grad_of(*xi);
      const T gy = yi->grad[0];
      for (auto& v : g) v += gy;
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Layout

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  check_shape(shape);
  SWINSITS_CHECK(numel_of(shape) == x.numel(), ErrorKind::Dimension, "reshape: cannot view ",
                 shape_str(x.shape()), " as ", shape_str(shape));
  const bool rg = needs_grad<T>(x);
  auto y = make_output<T>(std::move(shape), std::vector<T>(x.values().begin(), x.values().end()), rg);
  if (rg) {
    ImplPtr<T> xi = x.impl(), yi = y.impl();
    record<T>("reshape", {xi.get()}, y, [xi, yi] {
      if (yi->grad.empty()) return;
      auto& g = grad_of(*xi);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += yi->grad[i];
    });
  }
  return y;
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::int64_t>& axes) {
  const auto& xs = x.shape();
  const auto r = xs.size();
  SWINSITS_CHECK(axes.size() == r, ErrorKind::Dimension, "permute: ", axes.size(),
                 " axes for shape ", shape_str(xs));
  std::vector<bool> seen(r, false);
  for (auto a : axes) {
    SWINSITS_CHECK(a >= 0 && static_cast<std::size_t>(a) < r && !seen[static_cast<std::size_t>(a)],
                   ErrorKind::Dimension, "permute: invalid axis list for ", shape_str(xs));
    seen[static_cast<std::size_t>(a)] = true;
  }
  const auto in_strides = row_major_strides(xs);
  Shape out_shape(r);
  std::vector<std::int64_t> strides(r);
  for (std::size_t i = 0; i < r; ++i) {
    out_shape[i] = xs[static_cast<std::size_t>(axes[i])];
    strides[i] = in_strides[static_cast<std::size_t>(axes[i])];
  }
  const auto xv = x.values();
  std::vector<T> out(xv.size());
  for_each_strided(out_shape, strides, [&](std::int64_t o, std::int64_t i) {
    out[static_cast<std::size_t>(o)] = xv[static_cast<std::size_t>(i)];
  });
  const bool rg = needs_grad<T>(x);
  auto y = make_output<T>(out_shape, std::move(out), rg);
  if (rg) {
    ImplPtr<T> xi = x.impl(), yi = y.impl();
    record<T>("permute", {xi.get()}, y, [xi, yi, out_shape, strides] {
      if (yi->grad.empty()) return;
      auto& g = grad_of(*xi);
      const auto& gy = yi->grad;
      for_each_strided(out_shape, strides, [&](std::int64_t o, std::int64_t i) {
        g[static_cast<std::size_t>(i)] += gy[static_cast<std::size_t>(o)];
      });
    });
  }
  return y;
}

template <typename T>
Tensor<T> transpose_last2(const Tensor<T>& x) {
  const auto r = x.rank();
  SWINSITS_CHECK(r >= 2, ErrorKind::Dimension, "transpose_last2 needs rank >= 2, got ",
                 shape_str(x.shape()));
  std::vector<std::int64_t> axes(static_cast<std::size_t>(r));
  std::iota(axes.begin(), axes.end(), 0);
  std::swap(axes[static_cast<std::size_t>(r - 1)], axes[static_cast<std::size_t>(r - 2)]);
  return permute(x, axes);
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::int64_t axis) {
  SWINSITS_CHECK(!xs.empty(), ErrorKind::Dimension, "concat of zero tensors");
  const auto& s0 = xs[0].shape();
  const auto r = static_cast<std::int64_t>(s0.size());
  if (axis < 0) axis += r;
  SWINSITS_CHECK(axis >= 0 && axis < r, ErrorKind::Dimension, "concat: axis out of range");
  const auto ax = static_cast<std::size_t>(axis);
  Shape out_shape = s0;
  out_shape[ax] = 0;
  for (const auto& t : xs) {
    const auto& s = t.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == ax || s[i] == s0[i];
    SWINSITS_CHECK(ok, ErrorKind::Dimension, "concat: incompatible shapes ", shape_str(s0), " and ",
                   shape_str(s));
    out_shape[ax] += s[ax];
  }
  std::int64_t outer = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= s0[i];
  std::int64_t inner = 1;
  for (std::size_t i = ax + 1; i < s0.size(); ++i) inner *= s0[i];
  const std::int64_t out_row = out_shape[ax] * inner;

  std::vector<T> out(static_cast<std::size_t>(numel_of(out_shape)));
  std::vector<std::int64_t> chunk(xs.size()), offset(xs.size());
  std::int64_t off = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    chunk[k] = xs[k].shape()[ax] * inner;
    offset[k] = off;
    off += chunk[k];
  }
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto v = xs[k].values();
    for (std::int64_t o = 0; o < outer; ++o)
      std::copy_n(v.begin() + o * chunk[k], chunk[k], out.begin() + o * out_row + offset[k]);
  }
  bool rg = false;
  for (const auto& t : xs) rg = rg || tracks(t);
  rg = rg && t_grad_enabled;
  auto y = make_output<T>(out_shape, std::move(out), rg);
  if (rg) {
    std::vector<ImplPtr<T>> ins;
    std::vector<const void*> ids;
    for (const auto& t : xs) {
      ins.push_back(t.impl());
      ids.push_back(t.id());
    }
    ImplPtr<T> yi = y.impl();
    record<T>("concat", std::move(ids), y, [ins, yi, chunk, offset, outer, out_row] {
      if (yi->grad.empty()) return;
      for (std::size_t k = 0; k < ins.size(); ++k) {
        if (!ins[k]->requires_grad) continue;
        auto& g = grad_of(*ins[k]);
        for (std::int64_t o = 0; o < outer; ++o) {
          const T* src = yi->grad.data() + o * out_row + offset[k];
          T* dst = g.data() + o * chunk[k];
          for (std::int64_t i = 0; i < chunk[k]; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Matmul

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  SWINSITS_CHECK(as.size() >= 2 && bs.size() >= 2 && as[as.size() - 1] == bs[bs.size() - 2],
                 ErrorKind::Dimension, "matmul: shape mismatch ", shape_str(as), " x ",
                 shape_str(bs));
  const std::int64_t m = as[as.size() - 2];
  const std::int64_t k = as[as.size() - 1];
  const std::int64_t n = bs[bs.size() - 1];
  const Shape ab(as.begin(), as.end() - 2);
  const Shape bb(bs.begin(), bs.end() - 2);
  const std::size_t br = std::max(ab.size(), bb.size());
  Shape batch(br);
  for (std::size_t i = 0; i < br; ++i) {
    const std::int64_t ea = i < br - ab.size() ? 1 : ab[i - (br - ab.size())];
    const std::int64_t eb = i < br - bb.size() ? 1 : bb[i - (br - bb.size())];
    SWINSITS_CHECK(ea == eb || ea == 1 || eb == 1, ErrorKind::Dimension,
                   "matmul: batch prefixes not broadcastable ", shape_str(as), " x ",
                   shape_str(bs));
    batch[i] = std::max(ea, eb);
  }
  Shape out_shape = batch;
  out_shape.push_back(m);
  out_shape.push_back(n);

  // Per-batch matrix offsets into a and b (broadcast axes get stride 0).
  const std::int64_t nb = numel_of(batch);
  std::vector<std::int64_t> a_off(static_cast<std::size_t>(nb)), b_off(static_cast<std::size_t>(nb));
  {
    std::vector<std::int64_t> sa(br, 0), sb(br, 0);
    std::int64_t acc = m * k;
    for (std::size_t i = ab.size(); i-- > 0;) {
      if (ab[i] != 1) sa[i + br - ab.size()] = acc;
      acc *= ab[i];
    }
    acc = k * n;
    for (std::size_t i = bb.size(); i-- > 0;) {
      if (bb[i] != 1) sb[i + br - bb.size()] = acc;
      acc *= bb[i];
    }
    for_each_strided(batch, sa, [&](std::int64_t o, std::int64_t off) {
      a_off[static_cast<std::size_t>(o)] = off;
    });
    for_each_strided(batch, sb, [&](std::int64_t o, std::int64_t off) {
      b_off[static_cast<std::size_t>(o)] = off;
    });
  }
  // b without batch axes: fold a's batch into rows and issue one gemm.
  const bool fold = bb.empty();

  std::vector<T> out(static_cast<std::size_t>(numel_of(out_shape)));
  const T* ap = a.values().data();
  const T* bp = b.values().data();
  if (fold) {
    blas::gemm(false, false, nb * m, n, k, T(1), ap, k, bp, n, T(0), out.data(), n);
  } else {
    for (std::int64_t i = 0; i < nb; ++i)
      blas::gemm(false, false, m, n, k, T(1), ap + a_off[static_cast<std::size_t>(i)], k,
                 bp + b_off[static_cast<std::size_t>(i)], n, T(0), out.data() + i * m * n, n);
  }
  const bool rg = needs_grad<T>(a, b);
  auto y = make_output<T>(out_shape, std::move(out), rg);
  if (rg) {
    ImplPtr<T> ai = a.impl(), bi = b.impl(), yi = y.impl();
    record<T>("matmul", {ai.get(), bi.get()}, y, [ai, bi, yi, a_off, b_off, m, n, k, nb, fold] {
      if (yi->grad.empty()) return;
      const T* gy = yi->grad.data();
      if (ai->requires_grad) {
        T* ga = grad_of(*ai).data();
        if (fold) {
          blas::gemm(false, true, nb * m, k, n, T(1), gy, n, bi->data.data(), n, T(1), ga, k);
        } else {
          for (std::int64_t i = 0; i < nb; ++i)
            blas::gemm(false, true, m, k, n, T(1), gy + i * m * n, n,
                       bi->data.data() + b_off[static_cast<std::size_t>(i)], n, T(1),
                       ga + a_off[static_cast<std::size_t>(i)], k);
        }
      }
      if (bi->requires_grad) {
        T* gb = grad_of(*bi).data();
        if (fold) {
          blas::gemm(true, false, k, n, nb * m, T(1), ai->data.data(), k, gy, n, T(1), gb, n);
        } else {
          for (std::int64_t i = 0; i < nb; ++i)
            blas::gemm(true, false, k, n, m, T(1),
                       ai->data.data() + a_off[static_cast<std::size_t>(i)], k, gy + i * m * n, n,
                       T(1), gb + b_off[static_cast<std::size_t>(i)], n);
        }
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  SWINSITS_CHECK(weight.rank() == 2, ErrorKind::Dimension, "linear: weight must be [in, out], got ",
                 shape_str(weight.shape()));
  auto y = matmul(x, weight);
  if (bias.defined()) y = add_suffix(y, bias);
  return y;
}

// ---------------------------------------------------------------------------
// Normalization and activations

template <typename T>
Tensor<T> softmax_last(const Tensor<T>& x) {
  SWINSITS_CHECK(x.rank() >= 1, ErrorKind::Dimension, "softmax_last on empty shape");
  const auto n = static_cast<std::size_t>(x.dim(-1));
  const auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t r = 0; r < xv.size(); r += n) {
    T mx = xv[r];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xv[r + j]);
    T z = 0;
    for (std::size_t j = 0; j < n; ++j) {
      out[r + j] = std::exp(xv[r + j] - mx);
      z += out[r + j];
    }
    const T inv = T(1) / z;
    for (std::size_t j = 0; j < n; ++j) out[r + j] *= inv;
  }
  const bool rg = needs_grad<T>(x);
  auto y = make_output<T>(x.shape(), std::move(out), rg);
  if (rg) {
    ImplPtr<T> xi = x.impl(), yi = y.impl();
    record<T>("softmax_last", {xi.get()}, y, [xi, yi, n] {
      if (yi->grad.empty()) return;
      auto& g = grad_of(*xi);
      const auto& gy = yi->grad;
      const auto& yv = yi->data;
      for (std::size_t r = 0; r < yv.size(); r += n) {
        T dot = 0;
        for (std::size_t j = 0; j < n; ++j) dot += gy[r + j] * yv[r + j];
        for (std::size_t j = 0; j < n; ++j) g[r + j] += yv[r + j] * (gy[r + j] - dot);
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, double eps) {
  SWINSITS_CHECK(eps > 0.0, ErrorKind::Parameter, "layer_norm: eps must be > 0, got ", eps);
  SWINSITS_CHECK(gamma.defined() == beta.defined(), ErrorKind::Parameter,
                 "layer_norm: gamma and beta must both be given or both omitted");
  const auto n = static_cast<std::size_t>(x.dim(-1));
  const bool affine = gamma.defined();
  if (affine) {
    SWINSITS_CHECK(gamma.shape() == Shape{static_cast<std::int64_t>(n)} && beta.shape() == gamma.shape(),
                   ErrorKind::Dimension, "layer_norm: affine shapes ", shape_str(gamma.shape()), "/",
                   shape_str(beta.shape()), " do not match last axis of ", shape_str(x.shape()));
  }
  const auto xv = x.values();
  const std::size_t rows = xv.size() / n;
  std::vector<T> out(xv.size());
  std::vector<T> xhat(xv.size());
  std::vector<T> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = xv.data() + r * n;
    double mean = 0;
    for (std::size_t j = 0; j < n; ++j) mean += xr[j];
    mean /= static_cast<double>(n);
    double var = 0;
    for (std::size_t j = 0; j < n; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<double>(n);
    const double rs = 1.0 / std::sqrt(var + eps);
    rstd[r] = static_cast<T>(rs);
    for (std::size_t j = 0; j < n; ++j) {
      const T h = static_cast<T>((xr[j] - mean) * rs);
      xhat[r * n + j] = h;
      out[r * n + j] = affine ? gamma.values()[j] * h + beta.values()[j] : h;
    }
  }
  const bool rg = needs_grad<T>(x, gamma, beta);
  auto y = make_output<T>(x.shape(), std::move(out), rg);
  if (rg) {
    ImplPtr<T> xi = x.impl(), yi = y.impl();
    ImplPtr<T> gi = affine ? gamma.impl() : nullptr;
    ImplPtr<T> bi = affine ? beta.impl() : nullptr;
    std::vector<const void*> ids{xi.get()};
    if (affine) {
      ids.push_back(gi.get());
      ids.push_back(bi.get());
    }
    record<T>("layer_norm", std::move(ids), y,
              [xi, gi, bi, yi, n, rows, xhat = std::move(xhat), rstd = std::move(rstd)] {
      if (yi->grad.empty()) return;
      const auto& gy = yi->grad;
      if (gi && gi->requires_grad) {
        std::vector<double> acc(n, 0.0);
        for (std::size_t i = 0; i < gy.size(); ++i) acc[i % n] += gy[i] * xhat[i];
        auto& gg = grad_of(*gi);
        for (std::size_t j = 0; j < n; ++j) gg[j] += static_cast<T>(acc[j]);
      }
      if (bi && bi->requires_grad) {
        std::vector<double> acc(n, 0.0);
        for (std::size_t i = 0; i < gy.size(); ++i) acc[i % n] += gy[i];
        auto& gb = grad_of(*bi);
        for (std::size_t j = 0; j < n; ++j) gb[j] += static_cast<T>(acc[j]);
      }
      if (!xi->requires_grad) return;
      auto& gx = grad_of(*xi);
      std::vector<T> dh(n);
      for (std::size_t r = 0; r < rows; ++r) {
        double mean_dh = 0;
        double mean_dhh = 0;
        for (std::size_t j = 0; j < n; ++j) {
          dh[j] = gy[r * n + j] * (gi ? gi->data[j] : T(1));
          mean_dh += dh[j];
          mean_dhh += static_cast<double>(dh[j]) * xhat[r * n + j];
        }
        mean_dh /= static_cast<double>(n);
        mean_dhh /= static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j)
          gx[r * n + j] += static_cast<T>(rstd[r] * (dh[j] - mean_dh - xhat[r * n + j] * mean_dhh));
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, double eps) {
  SWINSITS_CHECK(x.rank() >= 3, ErrorKind::Dimension, "instance_norm needs [B, C, ...], got ",
                 shape_str(x.shape()));
  const std::int64_t rows = x.dim(0) * x.dim(1);
  auto flat = reshape(x, Shape{rows, x.numel() / rows});
  return reshape(layer_norm(flat, Tensor<T>(), Tensor<T>(), eps), x.shape());
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  const auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i)
    out[i] = T(0.5) * xv[i] * (T(1) + std::erf(xv[i] * static_cast<T>(std::numbers::sqrt2 / 2)));
  const bool rg = needs_grad<T>(x);
  auto y = make_output<T>(x.shape(), std::move(out), rg);
  if (rg) {
    ImplPtr<T> xi = x.impl(), yi = y.impl();
    record<T>("gelu", {xi.get()}, y, [xi, yi] {
      if (yi->grad.empty()) return;
      auto& g = grad_of(*xi);
      const T inv_sqrt2 = static_cast<T>(std::numbers::sqrt2 / 2);
      const T inv_sqrt2pi = static_cast<T>(std::numbers::inv_sqrtpi * std::numbers::sqrt2 / 2);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const T v = xi->data[i];
        const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
        const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * v * v);
        g[i] += yi->grad[i] * (cdf + v * pdf);
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, double slope) {
  check_finite_scalar(slope, "leaky_relu slope");
  const T s = static_cast<T>(slope);
  const auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > T(0) ? xv[i] : s * xv[i];
  const bool rg = needs_grad<T>(x);
  auto y = make_output<T>(x.shape(), std::move(out), rg);
  if (rg) {
    ImplPtr<T> xi = x.impl(), yi = y.impl();
    record<T>("leaky_relu", {xi.get()}, y, [xi, yi, s] {
      if (yi->grad.empty()) return;
      auto& g = grad_of(*xi);
      for (std::size_t i = 0; i < g.size(); ++i)
        g[i] += yi->grad[i] * (xi->data[i] > T(0) ? T(1) : s);
    });
  }
  return y;
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, SplitMix64& rng) {
  SWINSITS_CHECK(rate >= 0.0 && rate < 1.0, ErrorKind::Parameter, "dropout rate must be in [0,1), got ",
                 rate);
  if (rate == 0.0) return x;
  const T keep = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> mask(static_cast<std::size_t>(x.numel()));
  for (auto& m : mask) m = rng.uniform() < rate ? T(0) : keep;
  return mul(x, Tensor<T>(x.shape(), std::move(mask)));
}

// ---------------------------------------------------------------------------
// Convolutions

namespace {

struct ConvGeometry {
  std::int64_t batch, in_c, out_c;
  std::array<std::int64_t, 3> in{}, out{}, k{}, s{}, p{};
  std::int64_t in_vol() const { return in[0] * in[1] * in[2]; }
  std::int64_t out_vol() const { return out[0] * out[1] * out[2]; }
  std::int64_t k_vol() const { return k[0] * k[1] * k[2]; }
  bool pointwise() const {
    return k == std::array<std::int64_t, 3>{1, 1, 1} && s == std::array<std::int64_t, 3>{1, 1, 1} &&
           p == std::array<std::int64_t, 3>{0, 0, 0};
  }
};

// Valid output range [lo, hi) along one axis for kernel tap `tap`.
inline void valid_range(std::int64_t out_n, std::int64_t in_n, std::int64_t stride, std::int64_t pad,
                        std::int64_t tap, std::int64_t& lo, std::int64_t& hi) {
  // in = o * stride - pad + tap in [0, in_n)
  const std::int64_t num_lo = pad - tap;
  lo = num_lo <= 0 ? 0 : (num_lo + stride - 1) / stride;
  const std::int64_t num_hi = in_n - 1 + pad - tap;
  hi = num_hi < 0 ? 0 : std::min(out_n, num_hi / stride + 1);
  if (hi < lo) hi = lo;
}

// Gathers rows (c, kd, kh, kw) x columns (od in [d0, d1), oh, ow) from one sample.
template <typename T>
void im2col(const ConvGeometry& g, const T* x, std::int64_t d0, std::int64_t d1, T* col) {
  const std::int64_t plane = g.out[1] * g.out[2];
  const std::int64_t ncols = (d1 - d0) * plane;
  std::int64_t row = 0;
  for (std::int64_t c = 0; c < g.in_c; ++c)
    for (std::int64_t kd = 0; kd < g.k[0]; ++kd)
      for (std::int64_t kh = 0; kh < g.k[1]; ++kh)
        for (std::int64_t kw = 0; kw < g.k[2]; ++kw, ++row) {
          T* dst = col + row * ncols;
          std::int64_t wlo, whi, hlo, hhi;
          valid_range(g.out[2], g.in[2], g.s[2], g.p[2], kw, wlo, whi);
          valid_range(g.out[1], g.in[1], g.s[1], g.p[1], kh, hlo, hhi);
          for (std::int64_t od = d0; od < d1; ++od) {
            const std::int64_t id = od * g.s[0] - g.p[0] + kd;
            T* dplane = dst + (od - d0) * plane;
            if (id < 0 || id >= g.in[0]) {
              std::fill_n(dplane, plane, T(0));
              continue;
            }
            for (std::int64_t oh = 0; oh < g.out[1]; ++oh) {
              T* drow = dplane + oh * g.out[2];
              if (oh < hlo || oh >= hhi) {
                std::fill_n(drow, g.out[2], T(0));
                continue;
              }
              const std::int64_t ih = oh * g.s[1] - g.p[1] + kh;
              const T* src = x + ((c * g.in[0] + id) * g.in[1] + ih) * g.in[2] - g.p[2] + kw;
              std::fill_n(drow, wlo, T(0));
              if (g.s[2] == 1) {
                std::copy(src + wlo, src + whi, drow + wlo);
              } else {
                for (std::int64_t ow = wlo; ow < whi; ++ow) drow[ow] = src[ow * g.s[2]];
              }
              std::fill(drow + whi, drow + g.out[2], T(0));
            }
          }
        }
}

template <typename T>
void col2im(const ConvGeometry& g, const T* col, std::int64_t d0, std::int64_t d1, T* x) {
  const std::int64_t plane = g.out[1] * g.out[2];
  const std::int64_t ncols = (d1 - d0) * plane;
  std::int64_t row = 0;
  for (std::int64_t c = 0; c < g.in_c; ++c)
    for (std::int64_t kd = 0; kd < g.k[0]; ++kd)
      for (std::int64_t kh = 0; kh < g.k[1]; ++kh)
        for (std::int64_t kw = 0; kw < g.k[2]; ++kw, ++row) {
          const T* src = col + row * ncols;
          std::int64_t wlo, whi, hlo, hhi;
          valid_range(g.out[2], g.in[2], g.s[2], g.p[2], kw, wlo, whi);
          valid_range(g.out[1], g.in[1], g.s[1], g.p[1], kh, hlo, hhi);
          for (std::int64_t od = d0; od < d1; ++od) {
            const std::int64_t id = od * g.s[0] - g.p[0] + kd;
            if (id < 0 || id >= g.in[0]) continue;
            const T* splane = src + (od - d0) * plane;
            for (std::int64_t oh = hlo; oh < hhi; ++oh) {
              const T* srow = splane + oh * g.out[2];
              const std::int64_t ih = oh * g.s[1] - g.p[1] + kh;
              T* dst = x + ((c * g.in[0] + id) * g.in[1] + ih) * g.in[2] - g.p[2] + kw;
              for (std::int64_t ow = wlo; ow < whi; ++ow) dst[ow * g.s[2]] += srow[ow];
            }
          }
        }
}

// Output depth planes per im2col chunk, keeping the column buffer bounded.
std::int64_t chunk_planes(const ConvGeometry& g) {
  constexpr std::int64_t kBudget = std::int64_t{1} << 22;
  const std::int64_t per_plane = g.in_c * g.k_vol() * g.out[1] * g.out[2];
  return std::clamp<std::int64_t>(kBudget / std::max<std::int64_t>(per_plane, 1), 1, g.out[0]);
}

}  // namespace

template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, Triple stride,
                 Triple pad) {
  SWINSITS_CHECK(x.rank() == 5 && weight.rank() == 5, ErrorKind::Dimension,
                 "conv3d expects x [B,C,D,H,W] and weight [F,C,kd,kh,kw], got ", shape_str(x.shape()),
                 " and ", shape_str(weight.shape()));
  SWINSITS_CHECK(x.dim(1) == weight.dim(1), ErrorKind::Dimension, "conv3d: input channels ",
                 x.dim(1), " do not match weight ", shape_str(weight.shape()));
  ConvGeometry g{};
  g.batch = x.dim(0);
  g.in_c = x.dim(1);
  g.out_c = weight.dim(0);
  for (int i = 0; i < 3; ++i) {
    g.in[i] = x.dim(2 + i);
    g.k[i] = weight.dim(2 + i);
    g.s[i] = stride[i];
    g.p[i] = pad[i];
    SWINSITS_CHECK(g.s[i] >= 1 && g.p[i] >= 0, ErrorKind::Parameter, "conv3d: invalid stride/pad");
    SWINSITS_CHECK(g.in[i] + 2 * g.p[i] >= g.k[i], ErrorKind::Dimension, "conv3d: kernel ",
                   shape_str(weight.shape()), " larger than padded input ", shape_str(x.shape()));
    g.out[i] = (g.in[i] + 2 * g.p[i] - g.k[i]) / g.s[i] + 1;
  }
  if (bias.defined())
    SWINSITS_CHECK(bias.shape() == Shape{g.out_c}, ErrorKind::Dimension, "conv3d: bias ",
                   shape_str(bias.shape()), " does not match ", g.out_c, " filters");

  const std::int64_t ck = g.in_c * g.k_vol();
  const std::int64_t n_out = g.out_vol();
  const std::int64_t x_stride = g.in_c * g.in_vol();
  const std::int64_t y_stride = g.out_c * n_out;
  const std::int64_t planes = chunk_planes(g);
  const bool pointwise = g.pointwise();
  const T* xp = x.values().data();
  const T* wp = weight.values().data();

  std::vector<T> out(static_cast<std::size_t>(g.batch * y_stride));
  std::vector<T> col;
  if (!pointwise) col.resize(static_cast<std::size_t>(ck * planes * g.out[1] * g.out[2]));
  for (std::int64_t b = 0; b < g.batch; ++b) {
    T* yb = out.data() + b * y_stride;
    if (pointwise) {
      blas::gemm(false, false, g.out_c, n_out, ck, T(1), wp, ck, xp + b * x_stride, n_out, T(0), yb,
                 n_out);
    } else {
      for (std::int64_t d0 = 0; d0 < g.out[0]; d0 += planes) {
        const std::int64_t d1 = std::min(g.out[0], d0 + planes);
        const std::int64_t nc = (d1 - d0) * g.out[1] * g.out[2];
        im2col(g, xp + b * x_stride, d0, d1, col.data());
        blas::gemm(false, false, g.out_c, nc, ck, T(1), wp, ck, col.data(), nc, T(0),
                   yb + d0 * g.out[1] * g.out[2], n_out);
      }
    }
    if (bias.defined()) {
      const auto bv = bias.values();
      for (std::int64_t f = 0; f < g.out_c; ++f) {
        T* row = yb + f * n_out;
        for (std::int64_t i = 0; i < n_out; ++i) row[i] += bv[static_cast<std::size_t>(f)];
      }
    }
  }

  const bool rg = needs_grad<T>(x, weight, bias);
  auto y = make_output<T>(Shape{g.batch, g.out_c, g.out[0], g.out[1], g.out[2]}, std::move(out), rg);
  if (rg) {
    ImplPtr<T> xi = x.impl(), wi = weight.impl(), yi = y.impl();
    ImplPtr<T> bi = bias.defined() ? bias.impl() : nullptr;
    std::vector<const void*> ids{xi.get(), wi.get()};
    if (bi) ids.push_back(bi.get());
    record<T>("conv3d", std::move(ids), y, [xi, wi, bi, yi, g, ck, n_out, x_stride, y_stride, planes,
                                            pointwise] {
      if (yi->grad.empty()) return;
      const T* gy = yi->grad.data();
      if (bi && bi->requires_grad) {
        auto& gb = grad_of(*bi);
        for (std::int64_t b = 0; b < g.batch; ++b)
          for (std::int64_t f = 0; f < g.out_c; ++f) {
            const T* row = gy + b * y_stride + f * n_out;
            double acc = 0;
            for (std::int64_t i = 0; i < n_out; ++i) acc += row[i];
            gb[static_cast<std::size_t>(f)] += static_cast<T>(acc);
          }
      }
      const bool need_w = wi->requires_grad;
      const bool need_x = xi->requires_grad;
      if (!need_w && !need_x) return;
      T* gw = need_w ? grad_of(*wi).data() : nullptr;
      T* gx = need_x ? grad_of(*xi).data() : nullptr;
      const T* xp = xi->data.data();
      const T* wp = wi->data.data();
      std::vector<T> col;
      if (!pointwise) col.resize(static_cast<std::size_t>(ck * planes * g.out[1] * g.out[2]));
      for (std::int64_t b = 0; b < g.batch; ++b) {
        const T* gyb = gy + b * y_stride;
        if (pointwise) {
          if (need_w)
            blas::gemm(false, true, g.out_c, ck, n_out, T(1), gyb, n_out, xp + b * x_stride, n_out,
                       T(1), gw, ck);
          if (need_x)
            blas::gemm(true, false, ck, n_out, g.out_c, T(1), wp, ck, gyb, n_out, T(1),
                       gx + b * x_stride, n_out);
          continue;
        }
        for (std::int64_t d0 = 0; d0 < g.out[0]; d0 += planes) {
          const std::int64_t d1 = std::min(g.out[0], d0 + planes);
          const std::int64_t nc = (d1 - d0) * g.out[1] * g.out[2];
          const T* gyc = gyb + d0 * g.out[1] * g.out[2];
          if (need_w) {
            im2col(g, xp + b * x_stride, d0, d1, col.data());
            blas::gemm(false, true, g.out_c, ck, nc, T(1), gyc, n_out, col.data(), nc, T(1), gw, ck);
          }
          if (need_x) {
            blas::gemm(true, false, ck, nc, g.out_c, T(1), wp, ck, gyc, n_out, T(0), col.data(), nc);
            col2im(g, col.data(), d0, d1, gx + b * x_stride);
          }
        }
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> conv3d_transpose(const Tensor<T>& x, const Tensor<T>& weight, Triple stride) {
  SWINSITS_CHECK(x.rank() == 5 && weight.rank() == 5, ErrorKind::Dimension,
                 "conv3d_transpose expects x [B,C,D,H,W] and weight [C,F,kd,kh,kw], got ",
                 shape_str(x.shape()), " and ", shape_str(weight.shape()));
  SWINSITS_CHECK(x.dim(1) == weight.dim(0), ErrorKind::Dimension, "conv3d_transpose: input channels ",
                 x.dim(1), " do not match weight ", shape_str(weight.shape()));
  for (int i = 0; i < 3; ++i)
    SWINSITS_CHECK(weight.dim(2 + i) == stride[i], ErrorKind::Unsupported,
                   "conv3d_transpose: kernel ", shape_str(weight.shape()),
                   " must equal the stride (k == s only)");
  const std::int64_t B = x.dim(0), C = x.dim(1), F = weight.dim(1);
  const std::int64_t D = x.dim(2), H = x.dim(3), W = x.dim(4);
  const std::int64_t kd = stride[0], kh = stride[1], kw = stride[2];
  const std::int64_t kv = kd * kh * kw;
  const std::int64_t n_in = D * H * W;
  const std::int64_t fk = F * kv;
  const Shape out_shape{B, F, D * kd, H * kh, W * kw};
  const std::int64_t y_stride = F * n_in * kv;

  // cols[(f, i, j, l), (d, h, w)] <-> y[f, d*kd+i, h*kh+j, w*kw+l]
  auto scatter = [=](const T* cols, T* yb, bool to_cols) {
    const std::int64_t OH = H * kh, OW = W * kw, OD = D * kd;
    for (std::int64_t f = 0; f < F; ++f)
      for (std::int64_t i = 0; i < kd; ++i)
        for (std::int64_t j = 0; j < kh; ++j)
          for (std::int64_t l = 0; l < kw; ++l) {
            const std::int64_t row = ((f * kd + i) * kh + j) * kw + l;
            T* crow = const_cast<T*>(cols) + row * n_in;
            for (std::int64_t d = 0; d < D; ++d)
              for (std::int64_t h = 0; h < H; ++h) {
                T* yrow = yb + ((f * OD + d * kd + i) * OH + h * kh + j) * OW + l;
                T* c = crow + (d * H + h) * W;
                if (to_cols) {
                  for (std::int64_t w = 0; w < W; ++w) c[w] = yrow[w * kw];
                } else {
                  for (std::int64_t w = 0; w < W; ++w) yrow[w * kw] = c[w];
                }
              }
          }
  };

  const T* xp = x.values().data();
  const T* wp = weight.values().data();
  std::vector<T> out(static_cast<std::size_t>(numel_of(out_shape)));
  std::vector<T> cols(static_cast<std::size_t>(fk * n_in));
  for (std::int64_t b = 0; b < B; ++b) {
    blas::gemm(true, false, fk, n_in, C, T(1), wp, fk, xp + b * C * n_in, n_in, T(0), cols.data(), n_in);
    scatter(cols.data(), out.data() + b * y_stride, false);
  }
  const bool rg = needs_grad<T>(x, weight);
  auto y = make_output<T>(out_shape, std::move(out), rg);
  if (rg) {
    ImplPtr<T> xi = x.impl(), wi = weight.impl(), yi = y.impl();
    record<T>("conv3d_transpose", {xi.get(), wi.get()}, y,
              [xi, wi, yi, scatter, B, C, fk, n_in, y_stride] {
      if (yi->grad.empty()) return;
      std::vector<T> cols(static_cast<std::size_t>(fk * n_in));
      T* gw = wi->requires_grad ? grad_of(*wi).data() : nullptr;
      T* gx = xi->requires_grad ? grad_of(*xi).data() : nullptr;
      for (std::int64_t b = 0; b < B; ++b) {
        scatter(cols.data(), yi->grad.data() + b * y_stride, true);
        if (gx)
          blas::gemm(false, false, C, n_in, fk, T(1), wi->data.data(), fk, cols.data(), n_in, T(1),
                     gx + b * C * n_in, n_in);
        if (gw)
          blas::gemm(false, true, C, fk, n_in, T(1), xi->data.data() + b * C * n_in, n_in, cols.data(),
                     n_in, T(1), gw, fk);
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Indexing

template <typename T>
Tensor<T> roll3(const Tensor<T>& x, Triple shift) {
  SWINSITS_CHECK(x.rank() == 5, ErrorKind::Dimension, "roll3 expects [B,D,H,W,C], got ",
                 shape_str(x.shape()));
  const std::int64_t B = x.dim(0), D = x.dim(1), H = x.dim(2), W = x.dim(3), C = x.dim(4);
  auto wrap = [](std::int64_t v, std::int64_t n) { return ((v % n) + n) % n; };
  const std::int64_t sd = wrap(shift[0], D), sh = wrap(shift[1], H), sw = wrap(shift[2], W);
  // For each output voxel, the source voxel (linear, in units of C).
  std::vector<std::int64_t> src(static_cast<std::size_t>(B * D * H * W));
  std::size_t o = 0;
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t d = 0; d < D; ++d)
      for (std::int64_t h = 0; h < H; ++h)
        for (std::int64_t w = 0; w < W; ++w)
          src[o++] = ((b * D + wrap(d - sd, D)) * H + wrap(h - sh, H)) * W + wrap(w - sw, W);
  const auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t v = 0; v < src.size(); ++v)
    std::copy_n(xv.begin() + src[v] * C, C, out.begin() + static_cast<std::int64_t>(v) * C);
  const bool rg = needs_grad<T>(x);
  auto y = make_output<T>(x.shape(), std::move(out), rg);
  if (rg) {
    ImplPtr<T> xi = x.impl(), yi = y.impl();
    record<T>("roll3", {xi.get()}, y, [xi, yi, src = std::move(src), C] {
      if (yi->grad.empty()) return;
      auto& g = grad_of(*xi);
      for (std::size_t v = 0; v < src.size(); ++v) {
        T* dst = g.data() + src[v] * C;
        const T* gy = yi->grad.data() + static_cast<std::int64_t>(v) * C;
        for (std::int64_t c = 0; c < C; ++c) dst[c] += gy[c];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, const std::vector<std::int64_t>& index) {
  SWINSITS_CHECK(table.rank() == 2, ErrorKind::Dimension, "gather_rows expects a [N, M] table, got ",
                 shape_str(table.shape()));
  const std::int64_t N = table.dim(0), M = table.dim(1);
  for (auto i : index)
    SWINSITS_CHECK(i >= 0 && i < N, ErrorKind::Range, "gather_rows: index ", i, " outside table of ",
                   N, " rows");
  const auto tv = table.values();
  std::vector<T> out(index.size() * static_cast<std::size_t>(M));
  for (std::size_t r = 0; r < index.size(); ++r)
    std::copy_n(tv.begin() + index[r] * M, M, out.begin() + static_cast<std::int64_t>(r) * M);
  const bool rg = needs_grad<T>(table);
  auto y = make_output<T>(Shape{static_cast<std::int64_t>(index.size()), M}, std::move(out), rg);
  if (rg) {
    ImplPtr<T> ti = table.impl(), yi = y.impl();
    record<T>("gather_rows", {ti.get()}, y, [ti, yi, index, M] {
      if (yi->grad.empty()) return;
      auto& g = grad_of(*ti);
      for (std::size_t r = 0; r < index.size(); ++r)
        for (std::int64_t j = 0; j < M; ++j)
          g[static_cast<std::size_t>(index[r] * M + j)] += yi->grad[r * static_cast<std::size_t>(M) + static_cast<std::size_t>(j)];
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Loss

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::int32_t> labels,
                        std::int32_t ignore_id) {
  SWINSITS_CHECK(logits.rank() >= 2, ErrorKind::Dimension, "cross_entropy expects [B,K,...], got ",
                 shape_str(logits.shape()));
  const std::int64_t B = logits.dim(0), K = logits.dim(1);
  const std::int64_t S = logits.numel() / (B * K);
  SWINSITS_CHECK(static_cast<std::int64_t>(labels.size()) == B * S, ErrorKind::Dimension,
                 "cross_entropy: ", labels.size(), " labels for logits ", shape_str(logits.shape()));
  const auto lv = logits.values();
  std::int64_t valid = 0;
  double total = 0.0;
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t s = 0; s < S; ++s) {
      const std::int32_t lab = labels[static_cast<std::size_t>(b * S + s)];
      if (lab == ignore_id) continue;
      SWINSITS_CHECK(lab >= 0 && lab < K, ErrorKind::Range, "cross_entropy: label ", lab,
                     " outside [0,", K, ")");
      const T* base = lv.data() + b * K * S + s;
      T mx = base[0];
      for (std::int64_t k = 1; k < K; ++k) mx = std::max(mx, base[k * S]);
      T z = 0;
      for (std::int64_t k = 0; k < K; ++k) z += std::exp(base[k * S] - mx);
      total += static_cast<double>(mx + std::log(z) - base[lab * S]);
      ++valid;
    }
  SWINSITS_CHECK(valid > 0, ErrorKind::Degenerate, "cross_entropy: every pixel is ignored");
  const bool rg = needs_grad<T>(logits);
  auto y = make_output<T>(Shape{1}, std::vector<T>{static_cast<T>(total / static_cast<double>(valid))}, rg);
  if (rg) {
    ImplPtr<T> li = logits.impl(), yi = y.impl();
    std::vector<std::int32_t> labs(labels.begin(), labels.end());
    record<T>("cross_entropy", {li.get()}, y, [li, yi, labs = std::move(labs), ignore_id, B, K, S, valid] {
      if (yi->grad.empty()) return;
      auto& g = grad_of(*li);
      const T coef = yi->grad[0] / static_cast<T>(valid);
      for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t s = 0; s < S; ++s) {
          const std::int32_t lab = labs[static_cast<std::size_t>(b * S + s)];
          if (lab == ignore_id) continue;
          const T* base = li->data.data() + b * K * S + s;
          T* gb = g.data() + b * K * S + s;
          T mx = base[0];
          for (std::int64_t k = 1; k < K; ++k) mx = std::max(mx, base[k * S]);
          T z = 0;
          for (std::int64_t k = 0; k < K; ++k) z += std::exp(base[k * S] - mx);
          for (std::int64_t k = 0; k < K; ++k) {
            const T p = std::exp(base[k * S] - mx) / z;
            gb[k * S] += coef * (p - (k == lab ? T(1) : T(0)));
          }
        }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------

#define SWINSITS_INSTANTIATE(T)                                                                   \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> scale(const Tensor<T>&, T);                                                  \
  template Tensor<T> add_suffix(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> sum(const Tensor<T>&);                                                       \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                            \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<std::int64_t>&);                 \
  template Tensor<T> transpose_last2(const Tensor<T>&);                                           \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::int64_t);                         \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> softmax_last(const Tensor<T>&);                                              \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double);    \
  template Tensor<T> instance_norm(const Tensor<T>&, double);                                     \
  template Tensor<T> gelu(const Tensor<T>&);                                                      \
  template Tensor<T> leaky_relu(const Tensor<T>&, double);                                        \
  template Tensor<T> dropout(const Tensor<T>&, double, SplitMix64&);                              \
  template Tensor<T> conv3d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Triple, Triple); \
  template Tensor<T> conv3d_transpose(const Tensor<T>&, const Tensor<T>&, Triple);                \
  template Tensor<T> roll3(const Tensor<T>&, Triple);                                             \
  template Tensor<T> gather_rows(const Tensor<T>&, const std::vector<std::int64_t>&);             \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const std::int32_t>, std::int32_t);

SWINSITS_INSTANTIATE(float)
SWINSITS_INSTANTIATE(double)

#undef SWINSITS_INSTANTIATE

}  // namespace swinsits
