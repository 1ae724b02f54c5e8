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

#ifndef SWINSITS_METRICS_HPP
#define SWINSITS_METRICS_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace swinsits {

/// K x K pixel counts, rows = actual class, columns = predicted class.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::int64_t num_classes = 2);
  // Rows must be square and nonempty.
  static ConfusionMatrix from_rows(const std::vector<std::vector<std::uint64_t>>& rows);

  std::int64_t num_classes() const { return k_; }
  std::uint64_t at(std::int64_t actual, std::int64_t predicted) const {
    return counts_[static_cast<std::size_t>(actual * k_ + predicted)];
  }
  void add(std::int64_t actual, std::int64_t predicted, std::uint64_t n = 1);
  void merge(const ConfusionMatrix& other);

  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(std::int64_t k) const;
  std::uint64_t col_sum(std::int64_t k) const;
  std::uint64_t off_diagonal() const { return total() - trace(); }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::int64_t k_;
  std::vector<std::uint64_t> counts_;
};

// Adds one count per pixel whose label is not `ignore_id`.
void accumulate(ConfusionMatrix& cm, std::span<const std::uint8_t> predicted,
                std::span<const std::uint8_t> labels, std::uint8_t ignore_id = 255);

double overall_accuracy(const ConfusionMatrix& cm);
// (p_o - p_e) / (1 - p_e); Degenerate error when p_e == 1.
double cohen_kappa(const ConfusionMatrix& cm);

struct ClassMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::uint64_t support = 0;
};

// Empty denominators give 0.
std::vector<ClassMetrics> per_class_prf(const ConfusionMatrix& cm);

struct AveragedMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

AveragedMetrics weighted_average(const std::vector<ClassMetrics>& per_class);

// Per-class P/R/F1/#pix rows, weighted avg., then OA and kappa in percent.
std::string format_report(const ConfusionMatrix& cm, const std::vector<std::string>& class_names);

}  // namespace swinsits

#endif  // SWINSITS_METRICS_HPP
