// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

// Inter-sample modeling over a mini-batch: attention-based knowledge transfer
// between sample embeddings, the vicinal sampling set, mixup synthesis and
// final training-set composition. Evaluation bypasses all of it.

#ifndef MMIE_ATTNMIXUP_HPP
#define MMIE_ATTNMIXUP_HPP

#include <optional>
#include <variant>
#include <vector>

#include "autograd.hpp"
#include "context.hpp"
#include "params.hpp"

namespace mmie {

struct HardClass {
  int label = 0;
  bool operator==(const HardClass&) const = default;
};

struct HardSeq {
  std::vector<int> tags;
  bool operator==(const HardSeq&) const = default;
};

using HardTarget = std::variant<HardClass, HardSeq>;

struct MixedTarget {
  double lambda = 1.0;
  HardTarget a;
  HardTarget b;
  bool operator==(const MixedTarget&) const = default;
};

using TargetSpec = std::variant<HardClass, HardSeq, MixedTarget>;

// One row of the batch matrix H. For relation extraction `rep` is a 1 x C
// vector; for sequence labeling it is an n x C token-state matrix whose real
// length is `length` (rows beyond it are padding), and `pooled` is the mean
// over the real rows.
struct BatchRow {
  ag::Var rep;
  ag::Var pooled;
  int length = 1;
  TargetSpec target;
};

struct BatchEmbeddings {
  bool token_level = false;
  std::vector<BatchRow> rows;

  std::size_t size() const { return rows.size(); }
};

struct AttnMixupConfig {
  int num_heads = 4;
  int attention_dim = 0;  // 0 selects max(8, C / num_heads)
  double dropout = 0.2;
  double delta = 0.7;  // share of the sampling set drawn from H
  double Delta = 0.6;  // share of H* in the final set; 1 - Delta for synthetic rows
  double beta_alpha = 0.2;

  void validate() const;
};

// floor(ratio * count) and round(ratio * count) with a small tolerance so that
// values such as (1 - 0.8) * 5 land on the mathematically exact integer.
std::size_t floor_share(double ratio, std::size_t count);
std::size_t round_share(double ratio, std::size_t count);

class BatchAttention {
 public:
  BatchAttention(const AttnMixupConfig& cfg, int dim, ParamStore& store, Rng& rng);

  // Transformed batch H*. Targets are copied unchanged. When `weights` is
  // given it receives one B x B row-stochastic matrix per head.
  BatchEmbeddings operator()(const BatchEmbeddings& h, const ForwardContext& ctx,
                             std::vector<Matrix>* weights = nullptr) const;

  int dim() const { return dim_; }
  int heads() const { return static_cast<int>(query_.size()); }

  // Parameter handles exposed for tests that pin specific values.
  ag::Var score_vector(int head) const { return score_[static_cast<std::size_t>(head)]; }
  ag::Var output_weight() const { return output_; }
  ag::Var ln_gamma() const { return ln_gamma_; }
  ag::Var ln_beta() const { return ln_beta_; }

 private:
  int dim_;
  double dropout_;
  std::vector<ag::Var> query_;
  std::vector<ag::Var> key_;
  std::vector<ag::Var> bias_;
  std::vector<ag::Var> score_;
  ag::Var output_;
  ag::Var ln_gamma_;
  ag::Var ln_beta_;
};

// Row i of the result comes from `h` for round(delta * B) uniformly chosen
// indices and from `h_star` otherwise. `from_h` (optional) receives the mask.
BatchEmbeddings vicinal_sampling_set(const BatchEmbeddings& h, const BatchEmbeddings& h_star,
                                     double delta, Rng& rng, std::vector<bool>* from_h = nullptr);

struct MixupRecord {
  std::size_t i = 0;
  std::size_t j = 0;
  double lambda = 1.0;
};

// B synthetic rows x_k = lambda x_i + (1 - lambda) x_j with i != j uniform and
// lambda ~ Beta(alpha, alpha), unless `fixed_lambda` is set.
BatchEmbeddings mixup_synthesize(const BatchEmbeddings& sampling_set, double beta_alpha, Rng& rng,
                                 std::optional<double> fixed_lambda = std::nullopt,
                                 std::vector<MixupRecord>* records = nullptr);

// All rows of H, then floor(Delta B) rows of H*, then floor((1 - Delta) B)
// rows of the synthetic set, the latter two sampled without replacement.
BatchEmbeddings compose_training_set(const BatchEmbeddings& h, const BatchEmbeddings& h_star,
                                     const BatchEmbeddings& synthetic, double Delta, Rng& rng);

// Evaluation path: the batch is used as is.
inline const BatchEmbeddings& eval_passthrough(const BatchEmbeddings& h) { return h; }

// Full training-time pipeline H -> H-hat.
BatchEmbeddings attn_mixup(const BatchAttention& attention, const AttnMixupConfig& cfg,
                           const BatchEmbeddings& h, const ForwardContext& ctx);

}  // namespace mmie

#endif  // MMIE_ATTNMIXUP_HPP
