// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#include "intrafusion.hpp"

#include <cmath>

#include "errors.hpp"

namespace mmie {

PromptBuilder::PromptBuilder(const std::vector<int>& level_channels, int d_model, ParamStore& store,
                             Rng& rng) {
  for (std::size_t l = 0; l < level_channels.size(); ++l) {
    const std::string p = "prompt.level" + std::to_string(l);
    weight_.push_back(store.add_weight(p + ".weight", level_channels[l], d_model, rng));
    bias_.push_back(store.add_zeros(p + ".bias", 1, d_model));
  }
}

MultiLevelPromptSignal PromptBuilder::build(const ObjectFeatures& features) const {
  for (const auto& stack : features)
    if (static_cast<int>(stack.size()) != levels())
      throw ShapeError("build_prompt_signal: expected " + std::to_string(levels()) +
                       " feature levels per object, got " + std::to_string(stack.size()));
  MultiLevelPromptSignal out;
  for (int l = 0; l < levels(); ++l) {
    // Objects share a spatial size, so the mean over the stacked rows equals
    // the mean of the per-object spatial means.
    const ag::Var stacked[] = {features[0][l], features[1][l], features[2][l]};
    ag::Var pooled = ag::mean_rows(ag::concat_rows(stacked));
    if (pooled.cols() != weight_[l].rows())
      throw ShapeError("build_prompt_signal: channel count mismatch at level " + std::to_string(l));
    out.levels.push_back(ag::linear(pooled, weight_[l], bias_[l]));
  }
  return out;
}

GaussianHead::GaussianHead(const std::string& name, int in_dim, int latent_dim, ParamStore& store,
                           Rng& rng)
    : latent_dim_(latent_dim) {
  weight_ = store.add_weight(name + ".weight", in_dim, 2 * latent_dim, rng);
  bias_ = store.add_zeros(name + ".bias", 1, 2 * latent_dim);
}

GaussianParams GaussianHead::operator()(const ag::Var& row) const {
  if (row.rows() != 1 || row.cols() != weight_.rows())
    throw ShapeError("gaussian head: input must be 1 x " + std::to_string(weight_.rows()));
  ag::Var out = ag::linear(row, weight_, bias_);
  return {ag::slice_cols(out, 0, latent_dim_),
          ag::clamp(ag::slice_cols(out, latent_dim_, latent_dim_), -kLogvarClamp, kLogvarClamp)};
}

GaussianParams textual_prior(const GaussianHead& head, const ag::Var& word_states) {
  if (word_states.rows() < 1) throw ShapeError("textual_prior: empty sequence");
  return head(ag::mean_rows(word_states));
}

GaussianParams visual_posterior(const GaussianHead& head, const ag::Var& image_embedding) {
  return head(image_embedding);
}

double gaussian_kl(const RowVector& mp, const RowVector& lp, const RowVector& mq, const RowVector& lq) {
  const auto diff = (mp - mq).array();
  return 0.5 * (lq.array() - lp.array() + (lp.array().exp() + diff.square()) * (-lq.array()).exp() - 1.0).sum();
}

ag::Var semantic_loss(const GaussianParams& p, const GaussianParams& q) {
  const auto k = p.mean.cols();
  for (const auto* v : {&p.mean, &p.logvar, &q.mean, &q.logvar}) {
    if (v->rows() != 1 || v->cols() != k) throw ShapeError("semantic_loss: dimension mismatch");
    if (!v->value().allFinite()) throw NumericError("semantic_loss: non-finite distribution parameters");
  }
  const RowVector mp = p.mean.value().row(0);
  const RowVector lp = p.logvar.value().row(0);
  const RowVector mq = q.mean.value().row(0);
  const RowVector lq = q.logvar.value().row(0);
  Matrix out(1, 1);
  out(0, 0) = gaussian_kl(mp, lp, mq, lq);
  return ag::make_result(std::move(out), {p.mean, p.logvar, q.mean, q.logvar}, [](ag::Node& self) {
    const double g = self.grad(0, 0);
    const auto mp = self.inputs[0]->value.array();
    const auto lp = self.inputs[1]->value.array();
    const auto mq = self.inputs[2]->value.array();
    const auto lq = self.inputs[3]->value.array();
    const Eigen::ArrayXXd inv_vq = (-lq).exp();
    const Eigen::ArrayXXd diff = mp - mq;
    const Matrix d_mp = (g * diff * inv_vq).matrix();
    const Matrix d_lp = (g * 0.5 * ((lp - lq).exp() - 1.0)).matrix();
    const Matrix d_lq = (g * 0.5 * (1.0 - (lp.exp() + diff.square()) * inv_vq)).matrix();
    if (self.inputs[0]->requires_grad) self.inputs[0]->accumulate(d_mp);
    if (self.inputs[1]->requires_grad) self.inputs[1]->accumulate(d_lp);
    if (self.inputs[2]->requires_grad) self.inputs[2]->accumulate(-d_mp);
    if (self.inputs[3]->requires_grad) self.inputs[3]->accumulate(d_lq);
  });
}

}  // namespace mmie
