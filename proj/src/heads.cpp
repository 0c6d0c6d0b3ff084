// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#include "heads.hpp"

#include <string>

#include "errors.hpp"

namespace mmie {

CrfHead::CrfHead(int d_model, int num_tags, bool constrained, ParamStore& store, Rng& rng)
    : num_tags_(num_tags) {
  if (num_tags < 1) throw ConfigError("crf head: num_tags must be >= 1");
  weight_ = store.add_weight("crf.emission.weight", d_model, num_tags, rng);
  bias_ = store.add_zeros("crf.emission.bias", 1, num_tags);
  transitions_ = store.add_zeros("crf.transitions", num_tags, num_tags);
  start_ = store.add_zeros("crf.start", 1, num_tags);
  end_ = store.add_zeros("crf.end", 1, num_tags);

  Matrix tmask = Matrix::Zero(num_tags, num_tags);
  Matrix smask = Matrix::Zero(1, num_tags);
  if (constrained) {
    for (int j = 0; j < num_tags; ++j) {
      if (!BioScheme::start_allowed(j)) smask(0, j) = kForbiddenTransition;
      for (int i = 0; i < num_tags; ++i)
        if (!BioScheme::transition_allowed(i, j)) tmask(i, j) = kForbiddenTransition;
    }
  }
  transition_mask_ = ag::constant(std::move(tmask));
  start_mask_ = ag::constant(std::move(smask));
}

ag::Var CrfHead::emissions(const ag::Var& states) const { return ag::linear(states, weight_, bias_); }

crf::Potentials CrfHead::potentials(const ag::Var& states) const {
  return {emissions(states).value(), transitions_.value() + transition_mask_.value(),
          (start_.value() + start_mask_.value()).row(0), end_.value().row(0)};
}

ag::Var CrfHead::hard_nll(const ag::Var& states, const std::vector<int>& tags, bool normalize) const {
  const auto n = static_cast<Eigen::Index>(tags.size());
  if (n < 1) throw ShapeError("crf_nll: empty target sequence");
  if (n > states.rows())
    throw ShapeError("crf_nll: target length " + std::to_string(n) + " exceeds " +
                     std::to_string(states.rows()) + " token states");
  const ag::Var rows = n == states.rows() ? states : ag::slice_rows(states, 0, n);
  ag::Var out = crf::nll(emissions(rows), transitions_ + transition_mask_, start_ + start_mask_, end_, tags);
  return normalize ? ag::scale(out, 1.0 / double(n)) : out;
}

ag::Var CrfHead::combined(const ag::Var& states, const TargetSpec& target, bool normalize) const {
  auto hard = [&](const HardTarget& t) -> ag::Var {
    const auto* seq = std::get_if<HardSeq>(&t);
    if (!seq) throw ShapeError("crf_nll: expected a tag-sequence target");
    return hard_nll(states, seq->tags, normalize);
  };
  if (const auto* seq = std::get_if<HardSeq>(&target)) {
    if (static_cast<Eigen::Index>(seq->tags.size()) != states.rows())
      throw ShapeError("crf_nll: target length " + std::to_string(seq->tags.size()) +
                       " differs from sequence length " + std::to_string(states.rows()));
    return hard_nll(states, seq->tags, normalize);
  }
  if (const auto* mixed = std::get_if<MixedTarget>(&target)) {
    return ag::scale(hard(mixed->a), mixed->lambda) + ag::scale(hard(mixed->b), 1.0 - mixed->lambda);
  }
  throw ShapeError("crf_nll: class targets are not valid for sequence labeling");
}

ag::Var CrfHead::nll(const ag::Var& states, const TargetSpec& target) const {
  return combined(states, target, false);
}

ag::Var CrfHead::normalized_nll(const ag::Var& states, const TargetSpec& target) const {
  return combined(states, target, true);
}

std::vector<int> CrfHead::decode(const ag::Var& states) const { return crf::viterbi(potentials(states)); }

RelationHead::RelationHead(int d_model, int num_relations, ParamStore& store, Rng& rng)
    : num_relations_(num_relations) {
  if (num_relations < 2) throw ConfigError("relation head: need at least two relations");
  weight_ = store.add_weight("relation.weight", 2 * d_model, num_relations, rng);
  bias_ = store.add_zeros("relation.bias", 1, num_relations);
}

ag::Var RelationHead::pair_vector(const ag::Var& states, const TokenSpan& head, const TokenSpan& tail) {
  const auto n = states.rows();
  for (const auto* sp : {&head, &tail})
    if (sp->start < 0 || sp->start >= sp->end || sp->end > n)
      throw ShapeError("re_logits: span [" + std::to_string(sp->start) + ", " + std::to_string(sp->end) +
                       ") outside a sequence of length " + std::to_string(n));
  const ag::Var parts[] = {ag::mean_rows(ag::slice_rows(states, head.start, head.length())),
                           ag::mean_rows(ag::slice_rows(states, tail.start, tail.length()))};
  return ag::concat_cols(parts);
}

ag::Var RelationHead::logits(const ag::Var& pair) const {
  if (pair.rows() != 1 || pair.cols() != weight_.rows())
    throw ShapeError("relation head: pair vector must be 1 x " + std::to_string(weight_.rows()));
  return ag::linear(pair, weight_, bias_);
}

ag::Var RelationHead::loss(const ag::Var& pair, const TargetSpec& target) const {
  const ag::Var z = logits(pair);
  auto hard = [&](const HardTarget& t) -> ag::Var {
    const auto* c = std::get_if<HardClass>(&t);
    if (!c) throw ShapeError("relation loss: expected a class target");
    return ag::cross_entropy(z, c->label);
  };
  if (const auto* c = std::get_if<HardClass>(&target)) return ag::cross_entropy(z, c->label);
  if (const auto* mixed = std::get_if<MixedTarget>(&target))
    return ag::scale(hard(mixed->a), mixed->lambda) + ag::scale(hard(mixed->b), 1.0 - mixed->lambda);
  throw ShapeError("relation loss: sequence targets are not valid for relation classification");
}

int RelationHead::predict(const ag::Var& pair) const {
  const Matrix z = logits(pair).value();
  int best = 0;
  for (int r = 1; r < z.cols(); ++r)
    if (z(0, r) > z(0, best)) best = r;
  return best;
}

ag::Var total_loss(const ag::Var& task_loss, const ag::Var& semantic_loss, double lambda_sem) {
  return task_loss + ag::scale(semantic_loss, lambda_sem);
}

}  // namespace mmie
