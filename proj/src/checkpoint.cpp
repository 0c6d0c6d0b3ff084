// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#include "checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace mmie {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {
constexpr const char* kMagic = "mmie-checkpoint";
constexpr int kVersion = 1;
}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << kMagic << ' ' << kVersion << '\n';
  f << model.config().to_json() << '\n';
  const auto& entries = model.params().entries();
  f << entries.size() << '\n';
  for (const auto& [name, v] : entries) f << name << ' ' << v.rows() << ' ' << v.cols() << '\n';
  for (const auto& [name, v] : entries)
    f.write(reinterpret_cast<const char*>(v.value().data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(v.value().size())));
  if (!f) throw IoError("write failed: " + path);
}

CheckpointContents read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() {
    if (!std::getline(f, line)) throw ParseError("truncated checkpoint header", lineno + 1);
    ++lineno;
    return line;
  };
  {
    std::istringstream head(next_line());
    std::string magic;
    int version = 0;
    head >> magic >> version;
    if (magic != kMagic || version != kVersion) throw ParseError("not a checkpoint file", lineno);
  }
  CheckpointContents out;
  out.config = ModelConfig::from_json(next_line());
  std::size_t count = 0;
  {
    std::istringstream c(next_line());
    if (!(c >> count)) throw ParseError("bad tensor count", lineno);
  }
  std::vector<std::pair<std::string, std::pair<Eigen::Index, Eigen::Index>>> manifest;
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream m(next_line());
    std::string name;
    Eigen::Index r = 0;
    Eigen::Index c = 0;
    if (!(m >> name >> r >> c) || r < 0 || c < 0) throw ParseError("bad manifest entry", lineno);
    manifest.push_back({name, {r, c}});
  }
  for (const auto& [name, shape] : manifest) {
    Matrix m(shape.first, shape.second);
    f.read(reinterpret_cast<char*>(m.data()),
           static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
    if (!f) throw IoError("checkpoint truncated while reading tensor " + name);
    out.tensors.emplace_back(name, std::move(m));
  }
  return out;
}

void load_weights(Model& model, const CheckpointContents& contents) {
  const auto& entries = model.params().entries();
  if (entries.size() != contents.tensors.size())
    throw ConfigError("checkpoint/config mismatch: " + std::to_string(contents.tensors.size()) +
                      " tensors stored, model has " + std::to_string(entries.size()));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& [name, var] = entries[i];
    const auto& [stored_name, value] = contents.tensors[i];
    if (name != stored_name || var.rows() != value.rows() || var.cols() != value.cols())
      throw ConfigError("checkpoint/config mismatch at tensor " + std::to_string(i) + " (" + stored_name +
                        " vs " + name + ")");
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    ag::Var v = entries[i].second;
    v.mutable_value() = contents.tensors[i].second;
  }
}

std::unique_ptr<Model> load_model(const std::string& path) {
  CheckpointContents c = read_checkpoint(path);
  auto model = std::make_unique<Model>(c.config);
  load_weights(*model, c);
  return model;
}

void write_label_manifest(const std::vector<std::string>& names, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  for (std::size_t i = 0; i < names.size(); ++i) f << i << '\t' << names[i] << '\n';
}

std::vector<std::string> read_label_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open label manifest: " + path);
  std::vector<std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("expected <id>\\t<name>", lineno);
    if (std::stoul(line.substr(0, tab)) != out.size()) throw ParseError("label ids must be consecutive", lineno);
    out.push_back(line.substr(tab + 1));
  }
  return out;
}

}  // namespace mmie
