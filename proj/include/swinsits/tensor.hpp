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

// Dense row-major tensors with a thread-local reverse-mode tape.
//
// Every op below returns a fresh tensor. When gradient recording is enabled
// and at least one input requires a gradient, the op appends one entry to the
// calling thread's tape; backward() replays the tape from the loss entry down
// to the first entry and then frees it. A second backward() on the same loss
// is rejected because its entry no longer exists.

#ifndef SWINSITS_TENSOR_HPP
#define SWINSITS_TENSOR_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "swinsits/error.hpp"
#include "swinsits/rng.hpp"

namespace swinsits {

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until something accumulates into it
  bool requires_grad = false;
};

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(impl_); }
  const Shape& shape() const { return impl_->shape; }
  std::int64_t rank() const { return static_cast<std::int64_t>(impl_->shape.size()); }
  std::int64_t dim(std::int64_t axis) const;
  std::int64_t numel() const { return static_cast<std::int64_t>(impl_->data.size()); }

  std::span<const T> values() const { return impl_->data; }
  // Direct write access; used for initialization and optimizer updates only.
  std::span<T> mutable_values() { return impl_->data; }
  T item() const;
  T at(std::initializer_list<std::int64_t> index) const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool flag);
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  std::span<T> mutable_grad();
  void zero_grad() { impl_->grad.clear(); }

  // Copy of the values with no gradient tracking.
  Tensor detach() const;

  const void* id() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl<T>>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl<T>> impl) : impl_(std::move(impl)) {}
  template <typename U>
  friend class Tensor;
  friend struct TensorAccess;

  std::shared_ptr<TensorImpl<T>> impl_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& x, bool requires_grad = false);

std::int64_t numel_of(const Shape& shape);

// ---------------------------------------------------------------------------
// Tape

struct TapeEntry {
  std::string op;
  std::vector<const void*> inputs;
  const void* output = nullptr;
  std::function<void()> backward;
};

class Tape {
 public:
  static Tape& current();

  void record(TapeEntry entry) { entries_.push_back(std::move(entry)); }
  const std::vector<TapeEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  std::vector<TapeEntry> entries_;
};

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Populates grad of every requires_grad tensor reachable from `loss`, then
/// frees the tape. Throws Dimension for non-scalar losses and Graph when the
/// loss was not produced by a recorded op (or its tape was already consumed).
template <typename T>
void backward(const Tensor<T>& loss);

// ---------------------------------------------------------------------------
// Ops

using Triple = std::array<std::int64_t, 3>;

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& x, T factor);
// x + b where b's shape equals a trailing suffix of x's shape.
template <typename T> Tensor<T> add_suffix(const Tensor<T>& x, const Tensor<T>& b);
template <typename T> Tensor<T> sum(const Tensor<T>& x);

template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T> Tensor<T> permute(const Tensor<T>& x, const std::vector<std::int64_t>& axes);
template <typename T> Tensor<T> transpose_last2(const Tensor<T>& x);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::int64_t axis);

// [.., m, k] x [.., k, n] with numpy-style broadcasting of the batch prefixes.
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
// x[.., in] * weight[in, out] (+ bias[out] when defined).
template <typename T> Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T> Tensor<T> softmax_last(const Tensor<T>& x);
// Normalizes over the last axis; gamma/beta may both be undefined (no affine).
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, double eps);
// Per-sample, per-channel normalization of [B, C, ...] over the trailing axes.
template <typename T> Tensor<T> instance_norm(const Tensor<T>& x, double eps);
template <typename T> Tensor<T> gelu(const Tensor<T>& x);
template <typename T> Tensor<T> leaky_relu(const Tensor<T>& x, double slope);
template <typename T> Tensor<T> dropout(const Tensor<T>& x, double rate, SplitMix64& rng);

template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, Triple stride,
                 Triple pad);
// Kernel extents must equal the stride (non-overlapping upsampling).
template <typename T>
Tensor<T> conv3d_transpose(const Tensor<T>& x, const Tensor<T>& weight, Triple stride);

// Circular roll of [B, D, H, W, C] along D, H, W: out[i] = x[(i - shift) mod n].
template <typename T> Tensor<T> roll3(const Tensor<T>& x, Triple shift);
// Row lookup table[index[i], :] for a [N, M] table.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, const std::vector<std::int64_t>& index);

// Mean over non-ignored positions of -log softmax(logits)[label], logits laid
// out [B, K, spatial...] and labels [B, spatial...].
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::int32_t> labels,
                        std::int32_t ignore_id);

}  // namespace swinsits

#endif  // SWINSITS_TENSOR_HPP
