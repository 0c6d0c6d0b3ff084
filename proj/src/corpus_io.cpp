// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

// Line-delimited corpus files. The first line is a header object; every
// following line holds one sample. Tensors are stored as a shape triple plus
// a flat row-major value list.

#include <fstream>
#include <sstream>

#include "errors.hpp"
#include "json.hpp"
#include "synthgen.hpp"

namespace mmie {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "mmie-corpus";
constexpr int kVersion = 1;

json tensor_to_json(const ImageTensor& t) {
  return json{{"shape", {t.height, t.width, t.channels}}, {"data", t.data}};
}

ImageTensor tensor_from_json(const json& j) {
  ImageTensor t;
  const auto& shape = j.at("shape");
  if (!shape.is_array() || shape.size() != 3) throw std::invalid_argument("tensor shape must have 3 entries");
  t.height = shape[0].get<int>();
  t.width = shape[1].get<int>();
  t.channels = shape[2].get<int>();
  t.data = j.at("data").get<std::vector<double>>();
  if (t.height <= 0 || t.width <= 0 || t.channels <= 0 || t.data.size() != t.size())
    throw std::invalid_argument("tensor data size does not match its shape");
  return t;
}

json sample_to_json(const Sample& s) {
  json j;
  j["id"] = s.id;
  j["task"] = task_name(s.task);
  j["tokens"] = s.tokens;
  j["image"] = tensor_to_json(s.image);
  json objs = json::array();
  for (const auto& o : s.objects) objs.push_back(tensor_to_json(o));
  j["objects"] = std::move(objs);
  if (s.task == Task::NER) {
    j["ner_labels"] = s.ner_labels;
  } else {
    j["head"] = {s.head.start, s.head.end};
    j["tail"] = {s.tail.start, s.tail.end};
    j["relation"] = s.relation;
  }
  return j;
}

TokenSpan span_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("span must be [start, end]");
  return {j[0].get<int>(), j[1].get<int>()};
}

Sample sample_from_json(const json& j) {
  Sample s;
  s.id = j.at("id").get<std::string>();
  s.task = parse_task(j.at("task").get<std::string>());
  s.tokens = j.at("tokens").get<std::vector<int>>();
  s.image = tensor_from_json(j.at("image"));
  const auto& objs = j.at("objects");
  if (!objs.is_array() || objs.size() != kObjectsPerSample)
    throw std::invalid_argument("expected exactly 3 object crops");
  for (std::size_t i = 0; i < kObjectsPerSample; ++i) s.objects[i] = tensor_from_json(objs[i]);
  if (s.task == Task::NER) {
    s.ner_labels = j.at("ner_labels").get<std::vector<int>>();
  } else {
    s.head = span_from_json(j.at("head"));
    s.tail = span_from_json(j.at("tail"));
    s.relation = j.at("relation").get<int>();
  }
  return s;
}

}  // namespace

std::string corpus_to_string(const std::vector<Sample>& samples) {
  std::string out = json{{"format", kFormat}, {"version", kVersion}}.dump();
  out += '\n';
  for (const auto& s : samples) {
    out += sample_to_json(s).dump();
    out += '\n';
  }
  return out;
}

std::vector<Sample> corpus_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError("missing header line", 1);
  ++lineno;
  try {
    const json header = json::parse(line);
    if (header.at("format").get<std::string>() != kFormat)
      throw ParseError("not a corpus file", lineno);
    if (header.at("version").get<int>() != kVersion)
      throw ParseError("unsupported corpus version", lineno);
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(std::string("bad header: ") + e.what(), lineno);
  }

  std::vector<Sample> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Sample s;
    try {
      s = sample_from_json(json::parse(line));
    } catch (const std::exception& e) {
      throw ParseError(e.what(), lineno);
    }
    if (auto problem = sample_problem(s); !problem.empty()) throw ParseError(problem, lineno);
    out.push_back(std::move(s));
  }
  return out;
}

void write_corpus(const std::vector<Sample>& samples, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << corpus_to_string(samples);
  if (!f) throw IoError("write failed: " + path);
}

std::vector<Sample> read_corpus(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return corpus_from_string(ss.str());
}

}  // namespace mmie
