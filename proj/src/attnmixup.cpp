// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#include "attnmixup.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "errors.hpp"

namespace mmie {

namespace {

constexpr double kShareTolerance = 1e-9;

HardTarget as_hard(const TargetSpec& t) {
  if (const auto* c = std::get_if<HardClass>(&t)) return *c;
  if (const auto* s = std::get_if<HardSeq>(&t)) return *s;
  throw ShapeError("mixup: cannot mix an already mixed target");
}

ag::Var real_rows(const BatchRow& row) {
  return row.length == row.rep.rows() ? row.rep : ag::slice_rows(row.rep, 0, row.length);
}

void check_aligned(const BatchEmbeddings& a, const BatchEmbeddings& b, const char* what) {
  if (a.size() != b.size() || a.token_level != b.token_level)
    throw ShapeError(std::string(what) + ": batches are not aligned");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.rows[i].length != b.rows[i].length || a.rows[i].rep.cols() != b.rows[i].rep.cols())
      throw ShapeError(std::string(what) + ": row " + std::to_string(i) + " shapes differ");
}

}  // namespace

void AttnMixupConfig::validate() const {
  if (num_heads < 1) throw ConfigError("attnmixup: num_heads must be >= 1");
  if (attention_dim < 0) throw ConfigError("attnmixup: attention_dim must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("attnmixup: dropout must be in [0, 1)");
  if (!(delta >= 0.0 && delta <= 1.0)) throw ConfigError("attnmixup: delta must be in [0, 1]");
  if (!(Delta >= 0.0 && Delta <= 1.0)) throw ConfigError("attnmixup: Delta must be in [0, 1]");
  if (!(beta_alpha > 0.0)) throw ConfigError("attnmixup: beta_alpha must be > 0");
}

std::size_t floor_share(double ratio, std::size_t count) {
  return static_cast<std::size_t>(std::floor(ratio * double(count) + kShareTolerance));
}

std::size_t round_share(double ratio, std::size_t count) {
  return static_cast<std::size_t>(std::floor(ratio * double(count) + 0.5 + kShareTolerance));
}

BatchAttention::BatchAttention(const AttnMixupConfig& cfg, int dim, ParamStore& store, Rng& rng)
    : dim_(dim), dropout_(cfg.dropout) {
  cfg.validate();
  const int att = cfg.attention_dim > 0 ? cfg.attention_dim : std::max(8, dim / cfg.num_heads);
  for (int h = 0; h < cfg.num_heads; ++h) {
    const std::string p = "attnmixup.head" + std::to_string(h);
    query_.push_back(store.add_weight(p + ".query.weight", dim, att, rng));
    key_.push_back(store.add_weight(p + ".key.weight", dim, att, rng));
    bias_.push_back(store.add_zeros(p + ".score.bias", 1, att));
    score_.push_back(store.add_weight(p + ".score.weight", att, 1, rng));
  }
  output_ = store.add_weight("attnmixup.output.weight", cfg.num_heads * dim, dim, rng);
  ln_gamma_ = store.add_ones("attnmixup.ln.gamma", 1, dim);
  ln_beta_ = store.add_zeros("attnmixup.ln.beta", 1, dim);
}

BatchEmbeddings BatchAttention::operator()(const BatchEmbeddings& h, const ForwardContext& ctx,
                                           std::vector<Matrix>* weights) const {
  const auto b = static_cast<Eigen::Index>(h.size());
  if (b == 0) throw ShapeError("batch_attention: empty batch");
  std::vector<ag::Var> pooled_rows;
  pooled_rows.reserve(h.size());
  for (const auto& r : h.rows) {
    if (r.pooled.rows() != 1 || r.pooled.cols() != dim_)
      throw ShapeError("batch_attention: pooled representation must be 1 x " + std::to_string(dim_));
    pooled_rows.push_back(r.pooled);
  }
  const ag::Var pooled = ag::concat_rows(pooled_rows);  // B x C

  std::vector<ag::Var> contexts;
  for (std::size_t k = 0; k < query_.size(); ++k) {
    ag::Var q = ag::matmul(pooled, query_[k]);
    ag::Var kk = ag::matmul(pooled, key_[k]);
    ag::Var hidden = ag::tanh(ag::add_row(ag::pairwise_add(q, kk), bias_[k]));
    ag::Var scores = ag::reshape(ag::matmul(hidden, score_[k]), b, b);
    if (!scores.value().allFinite()) throw NumericError("batch_attention: non-finite attention scores");
    ag::Var alpha = ag::softmax_rows(scores);
    if (weights) weights->push_back(alpha.value());
    contexts.push_back(ag::matmul(alpha, pooled));
  }
  ag::Var multi = ag::concat_cols(contexts);  // B x (heads * C)
  if (ctx.train) multi = ag::dropout(multi, dropout_, *ctx.rng);
  const ag::Var projected = ag::matmul(multi, output_);  // B x C

  BatchEmbeddings out;
  out.token_level = h.token_level;
  out.rows.reserve(h.size());
  for (Eigen::Index i = 0; i < b; ++i) {
    const BatchRow& src = h.rows[static_cast<std::size_t>(i)];
    const ag::Var context = ag::slice_rows(projected, i, 1);
    BatchRow row;
    row.length = src.length;
    row.target = src.target;
    if (h.token_level) {
      ag::Var states = ag::layer_norm_rows(ag::add_row(real_rows(src), context), ln_gamma_, ln_beta_);
      row.pooled = ag::mean_rows(states);
      row.rep = ag::pad_rows(states, src.rep.rows());
    } else {
      row.rep = ag::layer_norm_rows(src.rep + context, ln_gamma_, ln_beta_);
      row.pooled = row.rep;
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

BatchEmbeddings vicinal_sampling_set(const BatchEmbeddings& h, const BatchEmbeddings& h_star,
                                     double delta, Rng& rng, std::vector<bool>* from_h) {
  check_aligned(h, h_star, "vicinal_sampling_set");
  if (!(delta >= 0.0 && delta <= 1.0)) throw ConfigError("vicinal_sampling_set: delta outside [0, 1]");
  const std::size_t b = h.size();
  std::vector<bool> mask(b, false);
  for (std::size_t idx : rng.choose(b, round_share(delta, b))) mask[idx] = true;
  BatchEmbeddings out;
  out.token_level = h.token_level;
  for (std::size_t i = 0; i < b; ++i) out.rows.push_back(mask[i] ? h.rows[i] : h_star.rows[i]);
  if (from_h) *from_h = std::move(mask);
  return out;
}

BatchEmbeddings mixup_synthesize(const BatchEmbeddings& set, double beta_alpha, Rng& rng,
                                 std::optional<double> fixed_lambda, std::vector<MixupRecord>* records) {
  const std::size_t b = set.size();
  if (b < 2) throw ShapeError("mixup_synthesize: need at least two rows");
  if (!(beta_alpha > 0.0)) throw ConfigError("mixup_synthesize: beta_alpha must be > 0");
  BatchEmbeddings out;
  out.token_level = set.token_level;
  for (std::size_t k = 0; k < b; ++k) {
    const std::size_t i = rng.index(b);
    std::size_t j = rng.index(b - 1);
    if (j >= i) ++j;
    const double lambda = fixed_lambda ? *fixed_lambda : rng.beta(beta_alpha, beta_alpha);
    const BatchRow& xi = set.rows[i];
    const BatchRow& xj = set.rows[j];
    BatchRow row;
    if (set.token_level) {
      const int n = std::max(xi.length, xj.length);
      ag::Var a = ag::pad_rows(real_rows(xi), n);
      ag::Var c = ag::pad_rows(real_rows(xj), n);
      row.rep = ag::scale(a, lambda) + ag::scale(c, 1.0 - lambda);
      row.length = n;
      row.pooled = ag::mean_rows(row.rep);
    } else {
      row.rep = ag::scale(xi.rep, lambda) + ag::scale(xj.rep, 1.0 - lambda);
      row.pooled = row.rep;
    }
    row.target = MixedTarget{lambda, as_hard(xi.target), as_hard(xj.target)};
    if (records) records->push_back({i, j, lambda});
    out.rows.push_back(std::move(row));
  }
  return out;
}

BatchEmbeddings compose_training_set(const BatchEmbeddings& h, const BatchEmbeddings& h_star,
                                     const BatchEmbeddings& synthetic, double Delta, Rng& rng) {
  if (!(Delta >= 0.0 && Delta <= 1.0)) throw ConfigError("compose_training_set: Delta outside [0, 1]");
  const std::size_t b = h.size();
  if (h_star.size() != b || synthetic.size() != b)
    throw ShapeError("compose_training_set: all three sets must share the batch size");
  BatchEmbeddings out = h;
  for (std::size_t idx : rng.choose(b, floor_share(Delta, b))) out.rows.push_back(h_star.rows[idx]);
  for (std::size_t idx : rng.choose(b, floor_share(1.0 - Delta, b))) out.rows.push_back(synthetic.rows[idx]);
  return out;
}

BatchEmbeddings attn_mixup(const BatchAttention& attention, const AttnMixupConfig& cfg,
                           const BatchEmbeddings& h, const ForwardContext& ctx) {
  if (!ctx.train) return eval_passthrough(h);
  Rng& rng = *ctx.rng;
  BatchEmbeddings h_star = attention(h, ctx);
  if (h.size() < 2) {
    // Mixup needs a pair; a singleton batch keeps only its H / H* share.
    BatchEmbeddings out = h;
    for (std::size_t idx : rng.choose(h.size(), floor_share(cfg.Delta, h.size())))
      out.rows.push_back(h_star.rows[idx]);
    return out;
  }
  BatchEmbeddings tilde = vicinal_sampling_set(h, h_star, cfg.delta, rng);
  BatchEmbeddings synthetic = mixup_synthesize(tilde, cfg.beta_alpha, rng);
  return compose_training_set(h, h_star, synthetic, cfg.Delta, rng);
}

}  // namespace mmie
