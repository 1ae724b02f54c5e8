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

#ifndef SWINSITS_PARAMETERS_HPP
#define SWINSITS_PARAMETERS_HPP

#include <string>
#include <vector>

#include "swinsits/tensor.hpp"

namespace swinsits {

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

enum class Init { Zeros, Ones, TruncNormal, Uniform };

struct InitSpec {
  Init kind = Init::Zeros;
  double scale = 0.0;  // std for TruncNormal, bound for Uniform

  static InitSpec zeros() { return {Init::Zeros, 0.0}; }
  static InitSpec ones() { return {Init::Ones, 0.0}; }
  static InitSpec trunc_normal(double stddev = 0.02) { return {Init::TruncNormal, stddev}; }
  static InitSpec uniform(double bound) { return {Init::Uniform, bound}; }
};

/// Ordered, uniquely named set of trainable tensors. Creation order fixes both
/// the initialization draw order and the checkpoint layout.
template <typename T>
class ParameterSet {
 public:
  Tensor<T> create(const std::string& name, Shape shape, InitSpec init, SplitMix64& rng);

  const std::vector<NamedTensor<T>>& items() const { return items_; }
  std::vector<NamedTensor<T>>& items() { return items_; }
  // Undefined tensor when absent.
  Tensor<T> find(const std::string& name) const;
  std::int64_t total_values() const;
  void zero_grad();

 private:
  std::vector<NamedTensor<T>> items_;
};

}  // namespace swinsits

#endif  // SWINSITS_PARAMETERS_HPP
