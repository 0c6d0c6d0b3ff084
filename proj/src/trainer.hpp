// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MMIE_TRAINER_HPP
#define MMIE_TRAINER_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "config.hpp"
#include "metrics.hpp"
#include "model.hpp"

namespace mmie {

struct RunConfig {
  std::string train_path;
  std::string val_path;
  std::string test_path;
  ModelConfig model;
  double lambda_sem = 0.5;
  int batch_size = 8;  // 8 for NER, 16 for RE unless overridden
  int epochs = 30;     // 30 for NER, 25 for RE unless overridden
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  double warmup_fraction = 0.06;
  double max_grad_norm = 0.0;  // 0 disables clipping
  int eval_batch_size = 8;
  std::uint64_t seed = 1;
  bool no_semantic_loss = false;
  bool no_attnmixup = false;

  Task task() const { return model.task; }
  void validate() const;
  static RunConfig from_config(const KeyValueConfig& cfg);

  // Deterministic text covering every field that influences the run.
  std::string canonical() const;
  std::uint64_t hash() const { return fnv1a64(canonical()); }
  // File-name stem: run-<16 hex digits of the config hash>-s<seed>
  std::string stem() const;
};

// Linear warmup over the first warmup_steps, then linear decay to zero.
double schedule_factor(long long step, long long total_steps, long long warmup_steps);

// Decoupled weight decay Adam. Decay applies to tensors whose name ends in
// "weight".
class AdamW {
 public:
  AdamW(ParamStore& params, double weight_decay, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(double lr);
  long long steps() const { return t_; }

 private:
  ParamStore& params_;
  double weight_decay_, beta1_, beta2_, eps_;
  std::vector<Matrix> m_, v_;
  std::vector<bool> decay_;
  long long t_ = 0;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double task_loss = 0.0;
  double semantic_loss = 0.0;
  MetricsReport validation;

  std::string to_line() const;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  int best_epoch = 0;
  MetricsReport best_validation;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Trains `model` in place and leaves the best-validation weights loaded.
TrainResult train(const RunConfig& cfg, Model& model, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set, const EpochCallback& on_epoch = {});

std::vector<Prediction> predict_all(const Model& model, const std::vector<Sample>& samples, int batch_size);

MetricsReport score(const ModelConfig& cfg, const std::vector<Sample>& gold, const std::vector<Prediction>& pred);
// Scores two corpora in the record format; `pred` carries predicted labels.
MetricsReport score_corpora(Task task, int num_labels_or_types, const std::vector<Sample>& gold,
                            const std::vector<Sample>& pred);

MetricsReport evaluate(const Model& model, const std::vector<Sample>& samples, int batch_size = 8);

// Copies `gold` with labels replaced by predictions.
std::vector<Sample> with_predictions(const std::vector<Sample>& gold, const std::vector<Prediction>& pred);

std::vector<std::string> label_names(const ModelConfig& cfg);

struct RunOutputs {
  std::string checkpoint_path;
  std::string report_path;
  std::string log_path;
  TrainResult result;
  MetricsReport test;
  std::string report_json;
};

// Reads the corpus files named in `cfg`, trains, evaluates the selected
// checkpoint on the test split and writes <stem>.ckpt, <stem>.epochs.log,
// <stem>.report.json and the label manifest into `out_dir`.
RunOutputs run_training(const RunConfig& cfg, const std::string& out_dir, const EpochCallback& on_epoch = {});

}  // namespace mmie

#endif  // MMIE_TRAINER_HPP
