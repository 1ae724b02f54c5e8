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

#include "swinsits/parameters.hpp"

namespace swinsits {

template <typename T>
Tensor<T> ParameterSet<T>::create(const std::string& name, Shape shape, InitSpec init,
                                  SplitMix64& rng) {
  for (const auto& it : items_)
    SWINSITS_CHECK(it.name != name, ErrorKind::Parameter, "duplicate parameter name '", name, "'");
  Tensor<T> t(std::move(shape), true);
  auto v = t.mutable_values();
  switch (init.kind) {
    case Init::Zeros:
      break;
    case Init::Ones:
      for (auto& x : v) x = T(1);
      break;
    case Init::TruncNormal:
      // Resample outside two standard deviations.
      for (auto& x : v) {
        double z = rng.normal();
        while (z < -2.0 || z > 2.0) z = rng.normal();
        x = static_cast<T>(z * init.scale);
      }
      break;
    case Init::Uniform:
      for (auto& x : v) x = static_cast<T>((2.0 * rng.uniform() - 1.0) * init.scale);
      break;
  }
  items_.push_back({name, t});
  return t;
}

template <typename T>
Tensor<T> ParameterSet<T>::find(const std::string& name) const {
  for (const auto& it : items_)
    if (it.name == name) return it.tensor;
  return Tensor<T>();
}

template <typename T>
std::int64_t ParameterSet<T>::total_values() const {
  std::int64_t n = 0;
  for (const auto& it : items_) n += it.tensor.numel();
  return n;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& it : items_) it.tensor.zero_grad();
}

template class ParameterSet<float>;
template class ParameterSet<double>;

}  // namespace swinsits
