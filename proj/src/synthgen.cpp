// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#include "synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "config.hpp"
#include "errors.hpp"
#include "rng.hpp"
#include "tags.hpp"

namespace mmie {

std::string task_name(Task t) { return t == Task::NER ? "NER" : "RE"; }

Task parse_task(const std::string& s) {
  if (s == "NER" || s == "ner") return Task::NER;
  if (s == "RE" || s == "re") return Task::RE;
  throw ConfigError("unknown task: " + s);
}

int re_head_classes(int num_relations) { return (num_relations + kReTailClasses - 1) / kReTailClasses; }

int re_relation(int head_class, int tail_class, int num_relations) {
  return std::min(head_class * kReTailClasses + tail_class, num_relations - 1);
}

namespace {

// Vocabulary layout: ordinary words first, then one block per labeled pool.
// The last pool holds "ambiguous" entity words whose label is fixed by the
// object crops rather than by the word itself.
struct Vocabulary {
  int num_pools = 0;
  int pool_size = 0;
  int plain_words = 0;

  int plain(Rng& rng) const { return rng.integer(0, plain_words - 1); }
  int from_pool(int pool, Rng& rng) const {
    return plain_words + pool * pool_size + rng.integer(0, pool_size - 1);
  }
  int ambiguous(Rng& rng) const { return from_pool(num_pools - 1, rng); }
};

int pool_count(const CorpusSpec& s) {
  if (s.task == Task::NER) return s.num_entity_types + 1;
  return re_head_classes(s.num_relation_types) + kReTailClasses + 1;
}

Vocabulary make_vocabulary(const CorpusSpec& s) {
  Vocabulary v;
  v.num_pools = pool_count(s);
  v.pool_size = std::max(2, s.vocab_size / (2 * v.num_pools));
  v.plain_words = s.vocab_size - v.num_pools * v.pool_size;
  return v;
}

int palette_size(const CorpusSpec& s) {
  return s.task == Task::NER ? s.num_entity_types : kReTailClasses;
}

std::array<double, 3> palette_color(int index, int count) {
  // Evenly spaced hues at high saturation.
  const double h = 6.0 * double(index) / double(count);
  const double s = 0.9;
  const int sector = static_cast<int>(std::floor(h)) % 6;
  const double f = h - std::floor(h);
  const double p = 1.0 - s;
  const double q = 1.0 - s * f;
  const double t = 1.0 - s * (1.0 - f);
  switch (sector) {
    case 0: return {1.0, t, p};
    case 1: return {q, 1.0, p};
    case 2: return {p, 1.0, t};
    case 3: return {p, q, 1.0};
    case 4: return {t, p, 1.0};
    default: return {1.0, p, q};
  }
}

ImageTensor make_crop(const CorpusSpec& s, int hue, Rng& rng) {
  ImageTensor crop{s.object_size, s.object_size, s.channels, {}};
  crop.data.resize(crop.size());
  const auto color = palette_color(hue, palette_size(s));
  const double brightness = rng.uniform(0.7, 1.0);
  for (int y = 0; y < crop.height; ++y)
    for (int x = 0; x < crop.width; ++x)
      for (int c = 0; c < crop.channels; ++c) {
        const double base = c < 3 ? color[static_cast<std::size_t>(c)] : 0.5;
        const double v = base * brightness + rng.normal(0.0, 0.08);
        crop.data[(std::size_t(y) * crop.width + x) * crop.channels + c] = std::clamp(v, 0.0, 1.0);
      }
  return crop;
}

ImageTensor make_image(const CorpusSpec& s, const std::array<ImageTensor, kObjectsPerSample>& objects,
                       Rng& rng) {
  ImageTensor img{s.image_size, s.image_size, s.channels, {}};
  img.data.resize(img.size());
  for (auto& v : img.data) v = rng.uniform(0.0, 0.3);
  for (const auto& obj : objects) {
    const int oy = rng.integer(0, s.image_size - s.object_size);
    const int ox = rng.integer(0, s.image_size - s.object_size);
    for (int y = 0; y < obj.height; ++y)
      for (int x = 0; x < obj.width; ++x)
        for (int c = 0; c < obj.channels; ++c)
          img.data[(std::size_t(oy + y) * img.width + ox + x) * img.channels + c] =
              obj.data[(std::size_t(y) * obj.width + x) * obj.channels + c];
  }
  return img;
}

// Finds a start for a run of `len` tokens that leaves a one-token gap to every
// occupied position. Returns -1 when no slot is found.
int place_span(std::vector<bool>& used, int len, Rng& rng) {
  const int n = static_cast<int>(used.size());
  if (len > n) return -1;
  for (int attempt = 0; attempt < 32; ++attempt) {
    const int start = rng.integer(0, n - len);
    bool ok = true;
    for (int i = std::max(0, start - 1); i < std::min(n, start + len + 1) && ok; ++i) ok = !used[i];
    if (!ok) continue;
    for (int i = start; i < start + len; ++i) used[i] = true;
    return start;
  }
  return -1;
}

void add_visuals(const CorpusSpec& spec, Sample& s, int hue, Rng& rng) {
  for (auto& obj : s.objects) obj = make_crop(spec, hue, rng);
  s.image = make_image(spec, s.objects, rng);
}

Sample make_ner_sample(const CorpusSpec& spec, const Vocabulary& vocab, Rng& rng) {
  Sample s;
  s.task = Task::NER;
  const int n = rng.integer(spec.min_tokens, spec.max_tokens);
  s.tokens.resize(n);
  for (auto& t : s.tokens) t = vocab.plain(rng);
  s.ner_labels.assign(n, BioScheme::outside());

  const int hue = rng.integer(0, spec.num_entity_types - 1);
  std::vector<bool> used(n, false);
  const int entities = rng.integer(1, 2);
  for (int e = 0; e < entities; ++e) {
    const int len = rng.integer(1, 3);
    const int start = place_span(used, len, rng);
    if (start < 0) continue;
    const bool visual = rng.bernoulli(spec.visual_dependency);
    const int type = visual ? hue : rng.integer(0, spec.num_entity_types - 1);
    for (int i = start; i < start + len; ++i) {
      s.tokens[i] = visual ? vocab.ambiguous(rng) : vocab.from_pool(type, rng);
      s.ner_labels[i] = i == start ? BioScheme::begin(type) : BioScheme::inside(type);
    }
  }
  add_visuals(spec, s, hue, rng);
  return s;
}

Sample make_re_sample(const CorpusSpec& spec, const Vocabulary& vocab, Rng& rng) {
  Sample s;
  s.task = Task::RE;
  const int n = std::max(rng.integer(spec.min_tokens, spec.max_tokens), 5);
  s.tokens.resize(n);
  for (auto& t : s.tokens) t = vocab.plain(rng);

  const int head_classes = re_head_classes(spec.num_relation_types);
  const int hue = rng.integer(0, kReTailClasses - 1);
  const int head_class = rng.integer(0, head_classes - 1);
  const bool visual = rng.bernoulli(spec.visual_dependency);
  const int tail_class = visual ? hue : rng.integer(0, kReTailClasses - 1);

  std::vector<bool> used(n, false);
  int head_start = -1;
  int tail_start = -1;
  int head_len = 0;
  int tail_len = 0;
  while (head_start < 0 || tail_start < 0) {
    std::fill(used.begin(), used.end(), false);
    head_len = rng.integer(1, 2);
    tail_len = rng.integer(1, 2);
    head_start = place_span(used, head_len, rng);
    tail_start = place_span(used, tail_len, rng);
  }
  s.head = {head_start, head_start + head_len};
  s.tail = {tail_start, tail_start + tail_len};
  for (int i = s.head.start; i < s.head.end; ++i) s.tokens[i] = vocab.from_pool(head_class, rng);
  for (int i = s.tail.start; i < s.tail.end; ++i)
    s.tokens[i] = visual ? vocab.ambiguous(rng) : vocab.from_pool(head_classes + tail_class, rng);
  s.relation = re_relation(head_class, tail_class, spec.num_relation_types);
  add_visuals(spec, s, hue, rng);
  return s;
}

std::vector<Sample> make_split(const CorpusSpec& spec, const Vocabulary& vocab, const char* name,
                               int count, Rng& rng) {
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Sample s = spec.task == Task::NER ? make_ner_sample(spec, vocab, rng)
                                      : make_re_sample(spec, vocab, rng);
    char id[64];
    std::snprintf(id, sizeof(id), "%s-%06d", name, i);
    s.id = id;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

void CorpusSpec::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("corpus spec: " + m); };
  if (num_train <= 0 || num_val <= 0 || num_test <= 0) fail("split sizes must be positive");
  if (!(visual_dependency >= 0.0 && visual_dependency <= 1.0))
    fail("visual_dependency must lie in [0, 1]");
  if (num_entity_types < 1) fail("num_entity_types must be >= 1");
  if (num_relation_types < 2) fail("num_relation_types must be >= 2");
  if (min_tokens < 1 || max_tokens < min_tokens || max_tokens > kMaxSequenceLength)
    fail("token length bounds must satisfy 1 <= min <= max <= 32");
  if (task == Task::RE && max_tokens < 5) fail("RE samples need max_tokens >= 5");
  if (channels < 1) fail("channels must be >= 1");
  if (object_size < 1 || image_size < object_size) fail("need 1 <= object_size <= image_size");
  const int pools = pool_count(*this);
  if (vocab_size < 4 * pools + 4)
    fail("vocab_size too small: need at least " + std::to_string(4 * pools + 4));
}

CorpusSpec CorpusSpec::from_config(const KeyValueConfig& cfg) {
  CorpusSpec s;
  s.task = parse_task(cfg.get_string("task", "NER"));
  s.vocab_size = static_cast<int>(cfg.get_int("vocab_size", s.vocab_size));
  s.num_entity_types = static_cast<int>(cfg.get_int("num_entity_types", s.num_entity_types));
  s.num_relation_types = static_cast<int>(cfg.get_int("num_relation_types", s.num_relation_types));
  s.num_train = static_cast<int>(cfg.get_int("num_train", s.num_train));
  s.num_val = static_cast<int>(cfg.get_int("num_val", s.num_val));
  s.num_test = static_cast<int>(cfg.get_int("num_test", s.num_test));
  s.seed = static_cast<std::uint64_t>(cfg.get_int("data_seed", cfg.get_int("seed", 7)));
  s.visual_dependency = cfg.get_double("visual_dependency", s.visual_dependency);
  s.min_tokens = static_cast<int>(cfg.get_int("min_tokens", s.min_tokens));
  s.max_tokens = static_cast<int>(cfg.get_int("max_tokens", s.max_tokens));
  s.image_size = static_cast<int>(cfg.get_int("image_size", s.image_size));
  s.object_size = static_cast<int>(cfg.get_int("object_size", s.object_size));
  s.channels = static_cast<int>(cfg.get_int("channels", s.channels));
  return s;
}

Corpus generate_corpus(const CorpusSpec& spec) {
  spec.validate();
  const Vocabulary vocab = make_vocabulary(spec);
  // One independent stream per split so the splits can be produced in any
  // order (or concurrently) with identical results.
  Rng seeder(spec.seed);
  Rng train_rng(seeder.next());
  Rng val_rng(seeder.next());
  Rng test_rng(seeder.next());
  Corpus c;
  c.train = make_split(spec, vocab, "train", spec.num_train, train_rng);
  c.val = make_split(spec, vocab, "val", spec.num_val, val_rng);
  c.test = make_split(spec, vocab, "test", spec.num_test, test_rng);
  return c;
}

std::string sample_problem(const Sample& s) {
  auto check_tensor = [](const ImageTensor& t) {
    return t.height > 0 && t.width > 0 && t.channels > 0 && t.data.size() == t.size();
  };
  const int n = static_cast<int>(s.tokens.size());
  if (n < 1 || n > kMaxSequenceLength) return "token count must be in [1, 32]";
  for (int t : s.tokens)
    if (t < 0) return "negative token id";
  if (!check_tensor(s.image)) return "image tensor shape does not match its data";
  for (const auto& o : s.objects) {
    if (!check_tensor(o)) return "object tensor shape does not match its data";
    if (o.height != s.objects[0].height || o.width != s.objects[0].width ||
        o.channels != s.objects[0].channels)
      return "object crops differ in shape";
  }
  if (s.task == Task::NER) {
    if (static_cast<int>(s.ner_labels.size()) != n) return "ner_labels length differs from tokens";
    if (!BioScheme::is_valid_sequence(s.ner_labels)) return "ner_labels is not a valid BIO sequence";
  } else {
    auto in_bounds = [n](const TokenSpan& sp) { return 0 <= sp.start && sp.start < sp.end && sp.end <= n; };
    if (!in_bounds(s.head) || !in_bounds(s.tail)) return "entity span out of bounds";
    if (s.head.start < s.tail.end && s.tail.start < s.head.end) return "head and tail spans overlap";
    if (s.relation < 0) return "negative relation id";
  }
  return {};
}

}  // namespace mmie
