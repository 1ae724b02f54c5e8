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

// Self-check suites: finite-difference gradients, window bookkeeping against a
// brute-force attention, and metric hand values.

#ifndef SWINSITS_VERIFY_HPP
#define SWINSITS_VERIFY_HPP

#include <functional>
#include <string>
#include <vector>

namespace swinsits {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

using CheckSink = std::function<void(const CheckResult&)>;

// "gradcheck", "windows", "metrics", "all".
std::vector<std::string> verify_suites();

// Unknown suite names raise a Config error.
std::vector<CheckResult> run_verify(const std::string& suite, const CheckSink& sink = {});

}  // namespace swinsits

#endif  // SWINSITS_VERIFY_HPP
