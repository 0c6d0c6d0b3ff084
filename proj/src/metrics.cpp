// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#include "metrics.hpp"

#include <algorithm>

#include "errors.hpp"
#include "json.hpp"
#include "tags.hpp"

namespace mmie {

SpanSet bio_to_spans(std::span<const int> tags, int num_tags) {
  SpanSet out;
  int open_start = -1;
  int open_type = -1;
  auto close = [&](int end) {
    if (open_start >= 0) out.push_back({open_start, end, open_type});
    open_start = -1;
    open_type = -1;
  };
  for (std::size_t idx = 0; idx < tags.size(); ++idx) {
    const int i = static_cast<int>(idx);
    const int tag = tags[idx];
    if (tag < 0 || tag >= num_tags) throw ShapeError("bio_to_spans: unknown tag id " + std::to_string(tag));
    if (tag == BioScheme::outside()) {
      close(i);
    } else if (BioScheme::is_begin(tag) || open_type != BioScheme::type_of(tag)) {
      close(i);
      open_start = i;
      open_type = BioScheme::type_of(tag);
    }
  }
  close(static_cast<int>(tags.size()));
  return out;
}

std::vector<int> spans_to_bio(const SpanSet& spans, int length) {
  std::vector<int> tags(static_cast<std::size_t>(length), BioScheme::outside());
  for (const auto& s : spans) {
    if (s.start < 0 || s.end > length || s.start >= s.end)
      throw ShapeError("spans_to_bio: span outside the sequence");
    for (int i = s.start; i < s.end; ++i)
      tags[static_cast<std::size_t>(i)] = i == s.start ? BioScheme::begin(s.type) : BioScheme::inside(s.type);
  }
  return tags;
}

namespace {

MetricsReport finish(PrfCounts total, std::map<std::string, PrfCounts> per_type) {
  MetricsReport r;
  r.counts = total;
  r.precision = total.precision();
  r.recall = total.recall();
  r.f1 = total.f1();
  r.per_type = std::move(per_type);
  return r;
}

std::string name_of(const std::vector<std::string>& names, int id) {
  if (id >= 0 && id < static_cast<int>(names.size())) return names[static_cast<std::size_t>(id)];
  return "type_" + std::to_string(id);
}

}  // namespace

MetricsReport micro_prf(std::span<const SpanSet> gold, std::span<const SpanSet> pred,
                        const std::vector<std::string>& type_names) {
  if (gold.size() != pred.size()) throw ShapeError("micro_prf: gold and prediction counts differ");
  PrfCounts total;
  std::map<std::string, PrfCounts> per_type;
  for (const auto& n : type_names) per_type[n];
  for (std::size_t i = 0; i < gold.size(); ++i) {
    SpanSet g = gold[i];
    SpanSet p = pred[i];
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
    for (const auto& s : p) {
      const bool hit = std::binary_search(g.begin(), g.end(), s);
      auto& c = per_type[name_of(type_names, s.type)];
      (hit ? c.tp : c.fp) += 1;
      (hit ? total.tp : total.fp) += 1;
    }
    for (const auto& s : g)
      if (!std::binary_search(p.begin(), p.end(), s)) {
        per_type[name_of(type_names, s.type)].fn += 1;
        total.fn += 1;
      }
  }
  return finish(total, std::move(per_type));
}

MetricsReport micro_prf(std::span<const int> gold, std::span<const int> pred,
                        const std::vector<std::string>& label_names, int none_label) {
  if (gold.size() != pred.size()) throw ShapeError("micro_prf: gold and prediction counts differ");
  PrfCounts total;
  std::map<std::string, PrfCounts> per_type;
  for (std::size_t i = 0; i < label_names.size(); ++i)
    if (static_cast<int>(i) != none_label) per_type[label_names[i]];
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const int g = gold[i];
    const int p = pred[i];
    if (p != none_label) {
      auto& c = per_type[name_of(label_names, p)];
      (p == g ? c.tp : c.fp) += 1;
      (p == g ? total.tp : total.fp) += 1;
    }
    if (g != none_label && p != g) {
      per_type[name_of(label_names, g)].fn += 1;
      total.fn += 1;
    }
  }
  return finish(total, std::move(per_type));
}

std::string MetricsReport::to_json(int indent) const {
  nlohmann::ordered_json j;
  j["precision"] = precision;
  j["recall"] = recall;
  j["f1"] = f1;
  j["tp"] = counts.tp;
  j["fp"] = counts.fp;
  j["fn"] = counts.fn;
  nlohmann::ordered_json types = nlohmann::ordered_json::object();
  for (const auto& [name, c] : per_type)
    types[name] = {{"precision", c.precision()}, {"recall", c.recall()}, {"f1", c.f1()},
                   {"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}};
  j["per_type"] = std::move(types);
  return j.dump(indent);
}

}  // namespace mmie
