// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include "json.hpp"

#include "errors.hpp"
#include "metrics.hpp"
#include "rng.hpp"
#include "tags.hpp"

using namespace mmie;

namespace {

// Reference decoder written from the tag layout alone: walk the tags and
// close the open span whenever the next tag does not continue it.
SpanSet reference_spans(const std::vector<int>& tags) {
  SpanSet out;
  int open_start = -1;
  int open_type = -1;
  auto close = [&](int end) {
    if (open_start >= 0) out.push_back({open_start, end, open_type});
    open_start = -1;
  };
  for (int i = 0; i < static_cast<int>(tags.size()); ++i) {
    const int t = tags[static_cast<std::size_t>(i)];
    if (t == 0) {
      close(i);
      continue;
    }
    const int type = (t - 1) / 2;
    const bool inside = t % 2 == 0;
    if (inside && open_start >= 0 && open_type == type) continue;
    close(i);
    open_start = i;
    open_type = type;
  }
  close(static_cast<int>(tags.size()));
  return out;
}

const std::vector<std::string> kTypes{"PER", "LOC"};

}  // namespace

TEST_CASE("span decoding") {
  const int PER_B = BioScheme::begin(0), PER_I = BioScheme::inside(0);
  const int LOC_B = BioScheme::begin(1), LOC_I = BioScheme::inside(1);

  CHECK(bio_to_spans(std::vector<int>{0, 0, 0}, 5).empty());
  CHECK(bio_to_spans(std::vector<int>{PER_B, PER_I, 0}, 5) == SpanSet{{0, 2, 0}});
  CHECK(bio_to_spans(std::vector<int>{LOC_I, LOC_B}, 5) == SpanSet{{0, 1, 1}, {1, 2, 1}});
  CHECK(bio_to_spans(std::vector<int>{PER_B, LOC_I, LOC_I}, 5) == SpanSet{{0, 1, 0}, {1, 3, 1}});
  CHECK(bio_to_spans(std::vector<int>{}, 5).empty());
  CHECK_THROWS_AS(bio_to_spans(std::vector<int>{0, 5}, 5), ShapeError);

  Rng rng(3);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<int> tags(static_cast<std::size_t>(rng.integer(0, 12)));
    for (auto& t : tags) t = rng.integer(0, 4);
    const SpanSet spans = bio_to_spans(tags, 5);
    REQUIRE(spans == reference_spans(tags));
    // Valid sequences survive a round trip.
    if (BioScheme::is_valid_sequence(tags)) CHECK(spans_to_bio(spans, static_cast<int>(tags.size())) == tags);
  }
}

TEST_CASE("micro precision, recall and F1 over spans") {
  const std::vector<SpanSet> gold{{{0, 2, 0}}};
  const std::vector<SpanSet> pred{{{0, 2, 0}, {3, 4, 1}}};
  const MetricsReport r = micro_prf(gold, pred, kTypes);
  CHECK(r.precision == 0.5);
  CHECK(r.recall == 1.0);
  CHECK(r.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(r.per_type.at("PER").tp == 1);
  CHECK(r.per_type.at("LOC").fp == 1);

  const MetricsReport perfect = micro_prf(gold, gold, kTypes);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);

  const std::vector<SpanSet> none{{}};
  const MetricsReport empty = micro_prf(gold, none, kTypes);
  CHECK(empty.precision == 0.0);
  CHECK(empty.recall == 0.0);
  CHECK(empty.f1 == 0.0);

  // A boundary or type mismatch is both a false positive and a false negative.
  const std::vector<SpanSet> shifted{{{0, 1, 0}}};
  const MetricsReport s = micro_prf(gold, shifted, kTypes);
  CHECK(s.counts.fp == 1);
  CHECK(s.counts.fn == 1);

  const std::vector<SpanSet> two{{}, {}};
  CHECK_THROWS_AS(micro_prf(gold, two, kTypes), ShapeError);
}

TEST_CASE("classification metrics exclude the none label") {
  const std::vector<std::string> names{"none", "a", "b"};
  const std::vector<int> gold{0, 1, 2, 1, 0};
  const std::vector<int> pred{1, 1, 0, 2, 0};
  const MetricsReport r = micro_prf(gold, pred, names, 0);
  // tp: index 1. fp: indices 0, 3. fn: indices 2, 3.
  CHECK(r.counts.tp == 1);
  CHECK(r.counts.fp == 2);
  CHECK(r.counts.fn == 2);
  CHECK(r.precision == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(r.per_type.count("none") == 0);
  CHECK(r.per_type.at("a").tp == 1);
  CHECK(r.per_type.at("b").fn == 1);

  const std::vector<int> all_none{0, 0, 0, 0, 0};
  const MetricsReport zero = micro_prf(gold, all_none, names, 0);
  CHECK(zero.f1 == 0.0);
}

TEST_CASE("report json") {
  const std::vector<SpanSet> gold{{{0, 2, 0}}};
  const auto j = nlohmann::json::parse(micro_prf(gold, gold, kTypes).to_json());
  for (const char* key : {"precision", "recall", "f1", "per_type"}) CHECK(j.contains(key));
  CHECK(j["per_type"]["PER"]["f1"] == 1.0);
  CHECK(j["per_type"]["LOC"]["f1"] == 0.0);
}
