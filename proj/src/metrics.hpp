// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MMIE_METRICS_HPP
#define MMIE_METRICS_HPP

#include <compare>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace mmie {

struct LabeledSpan {
  int start = 0;
  int end = 0;  // exclusive
  int type = 0;
  auto operator<=>(const LabeledSpan&) const = default;
};

// Sorted, duplicate-free.
using SpanSet = std::vector<LabeledSpan>;

// Lenient decoding: B-X opens a span, I-X continues a span of type X, and an
// I-X that cannot continue one opens a new span. Tags outside [0, num_tags)
// are rejected.
SpanSet bio_to_spans(std::span<const int> tags, int num_tags);
std::vector<int> spans_to_bio(const SpanSet& spans, int length);

struct PrfCounts {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;

  double precision() const { return tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn); }
  double f1() const {
    const double p = precision();
    const double r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
  PrfCounts& operator+=(const PrfCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  PrfCounts counts;
  std::map<std::string, PrfCounts> per_type;

  // {"precision", "recall", "f1", "tp", "fp", "fn", "per_type": {name: {...}}}
  std::string to_json(int indent = 2) const;
};

MetricsReport micro_prf(std::span<const SpanSet> gold, std::span<const SpanSet> pred,
                        const std::vector<std::string>& type_names);

// Single-label classification; `none_label` (if >= 0) is never a positive.
MetricsReport micro_prf(std::span<const int> gold, std::span<const int> pred,
                        const std::vector<std::string>& label_names, int none_label = 0);

}  // namespace mmie

#endif  // MMIE_METRICS_HPP
