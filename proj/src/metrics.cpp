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

#include "swinsits/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include "swinsits/error.hpp"

namespace swinsits {

ConfusionMatrix::ConfusionMatrix(std::int64_t num_classes) : k_(num_classes) {
  SWINSITS_CHECK(num_classes >= 1, ErrorKind::Parameter, "confusion matrix needs at least one class");
  counts_.assign(static_cast<std::size_t>(k_ * k_), 0);
}

ConfusionMatrix ConfusionMatrix::from_rows(const std::vector<std::vector<std::uint64_t>>& rows) {
  ConfusionMatrix cm(static_cast<std::int64_t>(rows.size()));
  for (std::size_t a = 0; a < rows.size(); ++a) {
    SWINSITS_CHECK(rows[a].size() == rows.size(), ErrorKind::Dimension, "confusion matrix row ", a,
                   " has ", rows[a].size(), " entries, expected ", rows.size());
    for (std::size_t p = 0; p < rows.size(); ++p)
      cm.add(static_cast<std::int64_t>(a), static_cast<std::int64_t>(p), rows[a][p]);
  }
  return cm;
}

void ConfusionMatrix::add(std::int64_t actual, std::int64_t predicted, std::uint64_t n) {
  SWINSITS_CHECK(actual >= 0 && actual < k_, ErrorKind::Range, "actual class ", actual,
                 " outside [0, ", k_, ")");
  SWINSITS_CHECK(predicted >= 0 && predicted < k_, ErrorKind::Range, "predicted class ", predicted,
                 " outside [0, ", k_, ")");
  counts_[static_cast<std::size_t>(actual * k_ + predicted)] += n;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  SWINSITS_CHECK(other.k_ == k_, ErrorKind::Dimension, "cannot merge ", other.k_, "-class matrix into ",
                 k_, "-class matrix");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (auto c : counts_) s += c;
  return s;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t s = 0;
  for (std::int64_t k = 0; k < k_; ++k) s += at(k, k);
  return s;
}

std::uint64_t ConfusionMatrix::row_sum(std::int64_t k) const {
  std::uint64_t s = 0;
  for (std::int64_t p = 0; p < k_; ++p) s += at(k, p);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::int64_t k) const {
  std::uint64_t s = 0;
  for (std::int64_t a = 0; a < k_; ++a) s += at(a, k);
  return s;
}

void accumulate(ConfusionMatrix& cm, std::span<const std::uint8_t> predicted,
                std::span<const std::uint8_t> labels, std::uint8_t ignore_id) {
  SWINSITS_CHECK(predicted.size() == labels.size(), ErrorKind::Dimension, "accumulate: ",
                 predicted.size(), " predictions vs ", labels.size(), " labels");
  const auto K = cm.num_classes();
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    SWINSITS_CHECK(predicted[i] < K, ErrorKind::Range, "accumulate: predicted id ", int{predicted[i]},
                   " at pixel ", i, " is not below K = ", K);
    if (labels[i] == ignore_id) continue;
    SWINSITS_CHECK(labels[i] < K, ErrorKind::Range, "accumulate: label ", int{labels[i]}, " at pixel ",
                   i, " is not below K = ", K);
    cm.add(labels[i], predicted[i]);
  }
}

double overall_accuracy(const ConfusionMatrix& cm) {
  const auto n = cm.total();
  SWINSITS_CHECK(n > 0, ErrorKind::Degenerate, "overall accuracy of an empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(n);
}

double cohen_kappa(const ConfusionMatrix& cm) {
  const auto n = cm.total();
  SWINSITS_CHECK(n > 0, ErrorKind::Degenerate, "kappa of an empty confusion matrix");
  const double N = static_cast<double>(n);
  const double po = static_cast<double>(cm.trace()) / N;
  double pe = 0;
  for (std::int64_t k = 0; k < cm.num_classes(); ++k)
    pe += static_cast<double>(cm.row_sum(k)) * static_cast<double>(cm.col_sum(k));
  pe /= N * N;
  SWINSITS_CHECK(pe != 1.0, ErrorKind::Degenerate,
                 "kappa is undefined: chance agreement equals 1 (a single class on both sides)");
  return (po - pe) / (1.0 - pe);
}

std::vector<ClassMetrics> per_class_prf(const ConfusionMatrix& cm) {
  SWINSITS_CHECK(cm.total() > 0, ErrorKind::Degenerate, "per-class metrics of an empty confusion matrix");
  std::vector<ClassMetrics> out(static_cast<std::size_t>(cm.num_classes()));
  for (std::int64_t k = 0; k < cm.num_classes(); ++k) {
    auto& m = out[static_cast<std::size_t>(k)];
    const double tp = static_cast<double>(cm.at(k, k));
    const auto row = cm.row_sum(k), col = cm.col_sum(k);
    m.precision = col == 0 ? 0.0 : tp / static_cast<double>(col);
    m.recall = row == 0 ? 0.0 : tp / static_cast<double>(row);
    m.f1 = m.precision + m.recall == 0 ? 0.0 : 2 * m.precision * m.recall / (m.precision + m.recall);
    m.support = row;
  }
  return out;
}

AveragedMetrics weighted_average(const std::vector<ClassMetrics>& per_class) {
  double s = 0;
  AveragedMetrics a;
  for (const auto& m : per_class) {
    const double w = static_cast<double>(m.support);
    s += w;
    a.precision += m.precision * w;
    a.recall += m.recall * w;
    a.f1 += m.f1 * w;
  }
  SWINSITS_CHECK(s > 0, ErrorKind::Degenerate, "weighted average with zero total support");
  a.precision /= s;
  a.recall /= s;
  a.f1 /= s;
  return a;
}

std::string format_report(const ConfusionMatrix& cm, const std::vector<std::string>& class_names) {
  SWINSITS_CHECK(static_cast<std::int64_t>(class_names.size()) == cm.num_classes(), ErrorKind::Dimension,
                 "report: ", class_names.size(), " class names for a ", cm.num_classes(),
                 "-class matrix");
  const auto prf = per_class_prf(cm);
  const auto avg = weighted_average(prf);
  std::size_t width = std::string("weighted avg.").size();
  for (const auto& n : class_names) width = std::max(width, n.size());
  const int w = static_cast<int>(width);

  std::string out;
  char line[512];
  std::snprintf(line, sizeof line, "%-*s  %6s  %6s  %6s  %10s\n", w, "class", "P", "R", "F1", "#pix");
  out += line;
  for (std::size_t k = 0; k < prf.size(); ++k) {
    std::snprintf(line, sizeof line, "%-*s  %6.2f  %6.2f  %6.2f  %10llu\n", w, class_names[k].c_str(),
                  prf[k].precision, prf[k].recall, prf[k].f1,
                  static_cast<unsigned long long>(prf[k].support));
    out += line;
  }
  std::snprintf(line, sizeof line, "%-*s  %6.2f  %6.2f  %6.2f  %10llu\n", w, "weighted avg.",
                avg.precision, avg.recall, avg.f1, static_cast<unsigned long long>(cm.total()));
  out += line;
  std::snprintf(line, sizeof line, "Overall Accuracy  %.2f%%\n", 100.0 * overall_accuracy(cm));
  out += line;
  try {
    std::snprintf(line, sizeof line, "Overall Kappa     %.2f%%\n", 100.0 * cohen_kappa(cm));
  } catch (const Error&) {
    std::snprintf(line, sizeof line, "Overall Kappa     undefined\n");
  }
  out += line;
  return out;
}

}  // namespace swinsits
