// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MMIE_INTRAFUSION_HPP
#define MMIE_INTRAFUSION_HPP

#include <string>
#include <vector>

#include "autograd.hpp"
#include "encoders.hpp"
#include "params.hpp"

namespace mmie {

inline constexpr double kLogvarClamp = 10.0;

// One prompt row (1 x d_model) per text-encoder layer.
struct MultiLevelPromptSignal {
  std::vector<ag::Var> levels;
};

// Diagonal Gaussian; both members are 1 x k.
struct GaussianParams {
  ag::Var mean;
  ag::Var logvar;
};

// Average-pools every level over the three objects and their spatial extent,
// then maps the channel dimension to d_model with a per-level 1x1 projection.
class PromptBuilder {
 public:
  PromptBuilder(const std::vector<int>& level_channels, int d_model, ParamStore& store, Rng& rng);

  MultiLevelPromptSignal build(const ObjectFeatures& features) const;
  int levels() const { return static_cast<int>(weight_.size()); }

 private:
  std::vector<ag::Var> weight_;
  std::vector<ag::Var> bias_;
};

// Linear map from a pooled vector to (mean, clamped logvar).
class GaussianHead {
 public:
  GaussianHead(const std::string& name, int in_dim, int latent_dim, ParamStore& store, Rng& rng);

  GaussianParams operator()(const ag::Var& row) const;
  int latent_dim() const { return latent_dim_; }

 private:
  int latent_dim_;
  ag::Var weight_;
  ag::Var bias_;
};

// p(gamma): mean-pool the word states, then the textual head.
GaussianParams textual_prior(const GaussianHead& head, const ag::Var& word_states);
// p(beta): the visual head over the pooled image embedding.
GaussianParams visual_posterior(const GaussianHead& head, const ag::Var& image_embedding);

// KL(p || q) between diagonal Gaussians, closed form, 1x1.
ag::Var semantic_loss(const GaussianParams& p, const GaussianParams& q);

double gaussian_kl(const RowVector& mean_p, const RowVector& logvar_p, const RowVector& mean_q,
                   const RowVector& logvar_q);

}  // namespace mmie

#endif  // MMIE_INTRAFUSION_HPP
