// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MMIE_HEADS_HPP
#define MMIE_HEADS_HPP

#include <vector>

#include "attnmixup.hpp"
#include "crf.hpp"
#include "params.hpp"
#include "synthgen.hpp"
#include "tags.hpp"

namespace mmie {

// Additive score for transitions the BIO schema forbids.
inline constexpr double kForbiddenTransition = -1e4;

// Sequence-labeling head: token states -> emissions -> linear-chain CRF.
class CrfHead {
 public:
  // `constrained` adds kForbiddenTransition to every invalid BIO move; use
  // false for a plain CRF over an arbitrary tag set.
  CrfHead(int d_model, int num_tags, bool constrained, ParamStore& store, Rng& rng);

  int num_tags() const { return num_tags_; }

  ag::Var emissions(const ag::Var& states) const;
  crf::Potentials potentials(const ag::Var& states) const;

  // -log p(y | states). Mixed targets give lambda * nll(a) + (1 - lambda) * nll(b),
  // each component scored on the first len(component) rows of `states`.
  ag::Var nll(const ag::Var& states, const TargetSpec& target) const;
  // As nll() with every component divided by its own sequence length.
  ag::Var normalized_nll(const ag::Var& states, const TargetSpec& target) const;

  std::vector<int> decode(const ag::Var& states) const;

  ag::Var transitions_param() const { return transitions_; }
  ag::Var start_param() const { return start_; }
  ag::Var end_param() const { return end_; }
  ag::Var emission_weight() const { return weight_; }
  ag::Var emission_bias() const { return bias_; }

 private:
  ag::Var hard_nll(const ag::Var& states, const std::vector<int>& tags, bool normalize) const;
  ag::Var combined(const ag::Var& states, const TargetSpec& target, bool normalize) const;

  int num_tags_;
  ag::Var weight_;
  ag::Var bias_;
  ag::Var transitions_;
  ag::Var start_;
  ag::Var end_;
  ag::Var transition_mask_;
  ag::Var start_mask_;
};

// Relation head over the concatenated (head, tail) span representations.
class RelationHead {
 public:
  RelationHead(int d_model, int num_relations, ParamStore& store, Rng& rng);

  int num_relations() const { return num_relations_; }

  // 1 x 2*d_model: mean of the head-span states followed by the tail-span mean.
  static ag::Var pair_vector(const ag::Var& states, const TokenSpan& head, const TokenSpan& tail);
  ag::Var logits(const ag::Var& pair) const;
  ag::Var re_logits(const ag::Var& states, const TokenSpan& head, const TokenSpan& tail) const {
    return logits(pair_vector(states, head, tail));
  }
  // Cross-entropy; mixed targets are lambda-weighted.
  ag::Var loss(const ag::Var& pair, const TargetSpec& target) const;
  int predict(const ag::Var& pair) const;

  ag::Var weight() const { return weight_; }

 private:
  int num_relations_;
  ag::Var weight_;
  ag::Var bias_;
};

// task + lambda_sem * semantic, 1x1.
ag::Var total_loss(const ag::Var& task_loss, const ag::Var& semantic_loss, double lambda_sem);

}  // namespace mmie

#endif  // MMIE_HEADS_HPP
