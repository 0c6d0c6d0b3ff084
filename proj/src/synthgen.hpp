// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MMIE_SYNTHGEN_HPP
#define MMIE_SYNTHGEN_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace mmie {

class KeyValueConfig;

enum class Task { NER, RE };

std::string task_name(Task t);
Task parse_task(const std::string& s);

// Dense height x width x channels grid, row-major with channels innermost.
struct ImageTensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  std::size_t size() const { return std::size_t(height) * width * channels; }
  bool operator==(const ImageTensor&) const = default;
};

struct TokenSpan {
  int start = 0;
  int end = 0;  // exclusive
  int length() const { return end - start; }
  bool operator==(const TokenSpan&) const = default;
};

inline constexpr int kObjectsPerSample = 3;
inline constexpr int kMaxSequenceLength = 32;

struct Sample {
  std::string id;
  Task task = Task::NER;
  std::vector<int> tokens;
  ImageTensor image;
  std::array<ImageTensor, kObjectsPerSample> objects;
  std::vector<int> ner_labels;  // NER only
  TokenSpan head;               // RE only
  TokenSpan tail;               // RE only
  int relation = -1;            // RE only

  bool operator==(const Sample&) const = default;
};

struct CorpusSpec {
  Task task = Task::NER;
  int vocab_size = 200;
  int num_entity_types = 4;
  int num_relation_types = 6;
  int num_train = 4000;
  int num_val = 1000;
  int num_test = 1000;
  std::uint64_t seed = 7;
  double visual_dependency = 0.5;
  int min_tokens = 6;
  int max_tokens = 16;
  int image_size = 16;
  int object_size = 8;
  int channels = 3;

  void validate() const;
  static CorpusSpec from_config(const KeyValueConfig& cfg);
};

struct Corpus {
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
};

Corpus generate_corpus(const CorpusSpec& spec);

// Structural checks shared by the generator and the reader: object count and
// shapes, label length, BIO validity, span bounds. Returns an empty string
// when the sample is well formed.
std::string sample_problem(const Sample& s);

// Number of head-entity classes and tail-entity classes used by the RE
// generator, and the relation its (head class, tail class) pair maps to.
int re_head_classes(int num_relations);
inline constexpr int kReTailClasses = 2;
int re_relation(int head_class, int tail_class, int num_relations);

void write_corpus(const std::vector<Sample>& samples, const std::string& path);
std::vector<Sample> read_corpus(const std::string& path);

std::string corpus_to_string(const std::vector<Sample>& samples);
std::vector<Sample> corpus_from_string(const std::string& text);

}  // namespace mmie

#endif  // MMIE_SYNTHGEN_HPP
