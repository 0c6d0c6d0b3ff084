// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

// Checkpoint layout (all text lines end with '\n'):
//   mmie-checkpoint 1
//   <model config as one JSON line>
//   <tensor count>
//   <name> <rows> <cols>          one line per tensor, registration order
//   <raw little-endian float64 values, tensors back to back, row-major>

#ifndef MMIE_CHECKPOINT_HPP
#define MMIE_CHECKPOINT_HPP

#include <memory>
#include <string>
#include <vector>

#include "model.hpp"

namespace mmie {

void save_checkpoint(const Model& model, const std::string& path);

struct CheckpointContents {
  ModelConfig config;
  std::vector<std::pair<std::string, Matrix>> tensors;
};

CheckpointContents read_checkpoint(const std::string& path);

// Copies tensors into `model`; names and shapes must match exactly.
void load_weights(Model& model, const CheckpointContents& contents);

std::unique_ptr<Model> load_model(const std::string& path);

// One "<id>\t<name>" line per label.
void write_label_manifest(const std::vector<std::string>& names, const std::string& path);
std::vector<std::string> read_label_manifest(const std::string& path);

}  // namespace mmie

#endif  // MMIE_CHECKPOINT_HPP
