// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MMIE_MODEL_HPP
#define MMIE_MODEL_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "attnmixup.hpp"
#include "encoders.hpp"
#include "heads.hpp"
#include "intrafusion.hpp"
#include "params.hpp"
#include "synthgen.hpp"

namespace mmie {

class KeyValueConfig;

struct ModelConfig {
  Task task = Task::NER;
  TextEncoderConfig text;
  ImageBackboneConfig image;
  AttnMixupConfig attn;
  int latent_dim = 16;
  int num_entity_types = 4;
  int num_relation_types = 6;
  bool crf_constraints = true;
  std::uint64_t init_seed = 1;

  void validate() const;
  static ModelConfig from_config(const KeyValueConfig& cfg);
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);

  int num_tags() const { return 2 * num_entity_types + 1; }
  // Width C of one row of the batch matrix.
  int sample_dim() const { return task == Task::NER ? text.d_model : 2 * text.d_model; }
};

struct LossOptions {
  double lambda_sem = 0.5;
  bool use_semantic_loss = true;
  bool use_attnmixup = true;
};

struct LossBreakdown {
  double total = 0.0;
  double task = 0.0;
  double semantic = 0.0;  // reported even when it does not enter the total
  std::size_t training_rows = 0;
};

// Everything the intra-sample path produces for one sample.
struct SampleEncoding {
  ag::Var states;  // n x d_model word states (prompt rows removed)
  MultiLevelPromptSignal prompts;
  ag::Var image_embedding;
  GaussianParams prior;      // p(gamma), from the word states
  GaussianParams posterior;  // p(beta), from the image embedding
  ag::Var semantic;          // KL(p(gamma) || p(beta))
};

struct Prediction {
  std::vector<int> tags;              // NER
  int relation = -1;                  // RE
  Matrix scores;                      // emissions (NER) or logits (RE)
};

class Model {
 public:
  explicit Model(ModelConfig cfg);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  SampleEncoding encode(const Sample& s, const ForwardContext& ctx) const;

  // H for a batch: pooled token states (NER) or head/tail pair vectors (RE).
  BatchEmbeddings batch_embeddings(std::span<const Sample* const> batch,
                                   std::span<const SampleEncoding> encodings) const;

  // Mean task loss over H-hat plus lambda_sem times the batch-mean semantic
  // loss. In train mode with use_attnmixup the rows pass through AttnMixup.
  ag::Var batch_loss(std::span<const Sample* const> batch, const LossOptions& opts,
                     const ForwardContext& ctx, LossBreakdown* breakdown = nullptr) const;

  // Evaluation path: no gradient, no dropout, no inter-sample transforms.
  std::vector<Prediction> predict(std::span<const Sample* const> batch) const;

  const ImageBackbone& backbone() const { return *backbone_; }
  const TextEncoder& text_encoder() const { return *text_; }
  const PromptBuilder& prompt_builder() const { return *prompts_; }
  const GaussianHead& prior_head() const { return *prior_; }
  const GaussianHead& posterior_head() const { return *posterior_; }
  const BatchAttention& attention() const { return *attention_; }
  const CrfHead* crf_head() const { return crf_.get(); }
  const RelationHead* relation_head() const { return relation_.get(); }

 private:
  void check_sample(const Sample& s) const;
  ag::Var row_loss(const BatchRow& row) const;

  ModelConfig cfg_;
  ParamStore params_;
  std::unique_ptr<ImageBackbone> backbone_;
  std::unique_ptr<TextEncoder> text_;
  std::unique_ptr<PromptBuilder> prompts_;
  std::unique_ptr<GaussianHead> prior_;
  std::unique_ptr<GaussianHead> posterior_;
  std::unique_ptr<BatchAttention> attention_;
  std::unique_ptr<CrfHead> crf_;
  std::unique_ptr<RelationHead> relation_;
};

}  // namespace mmie

#endif  // MMIE_MODEL_HPP
