// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#include "encoders.hpp"

#include <cmath>
#include <string>

#include "errors.hpp"

namespace mmie {

void TextEncoderConfig::validate() const {
  if (vocab_size < 1) throw ConfigError("text encoder: vocab_size must be >= 1");
  if (d_model < 1 || num_heads < 1 || d_model % num_heads != 0)
    throw ConfigError("text encoder: d_model must be divisible by num_heads");
  if (num_layers < 1) throw ConfigError("text encoder: num_layers must be >= 1");
  if (max_len < 1) throw ConfigError("text encoder: max_len must be >= 1");
  if (ffn_dim < 1) throw ConfigError("text encoder: ffn_dim must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("text encoder: dropout must be in [0, 1)");
}

void ImageBackboneConfig::validate() const {
  if (channels.empty()) throw ConfigError("image backbone: at least one level required");
  if (kernel_sizes.size() != channels.size())
    throw ConfigError("image backbone: one kernel size per level required");
  for (int k : kernel_sizes)
    if (k < 1 || k % 2 == 0) throw ConfigError("image backbone: kernel sizes must be odd");
  for (int c : channels)
    if (c < 1) throw ConfigError("image backbone: channel counts must be positive");
  if (in_channels < 1 || pooled_dim < 1) throw ConfigError("image backbone: bad dimensions");
  const int div = 1 << levels();
  if (object_size % div != 0 || image_size % div != 0)
    throw ConfigError("image backbone: image and object sides must be divisible by 2^levels");
}

Matrix tensor_to_matrix(const ImageTensor& t) {
  Matrix m(Eigen::Index(t.height) * t.width, t.channels);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = t.data[static_cast<std::size_t>(i)];
  return m;
}

ImageBackbone::ImageBackbone(ImageBackboneConfig cfg, ParamStore& store, Rng& rng)
    : cfg_(std::move(cfg)) {
  cfg_.validate();
  int in = cfg_.in_channels;
  for (int l = 0; l < cfg_.levels(); ++l) {
    const int k = cfg_.kernel_sizes[l];
    const std::string p = "backbone.level" + std::to_string(l);
    conv_weight_.push_back(store.add_weight(p + ".weight", k * k * in, cfg_.channels[l], rng));
    conv_bias_.push_back(store.add_zeros(p + ".bias", 1, cfg_.channels[l]));
    in = cfg_.channels[l];
  }
  pool_weight_ = store.add_weight("backbone.pool.weight", in, cfg_.pooled_dim, rng);
  pool_bias_ = store.add_zeros("backbone.pool.bias", 1, cfg_.pooled_dim);
}

std::vector<ag::Var> ImageBackbone::level_features(const ImageTensor& input, int expected_size) const {
  if (input.height != expected_size || input.width != expected_size ||
      input.channels != cfg_.in_channels || input.data.size() != input.size())
    throw ShapeError("image backbone: expected " + std::to_string(expected_size) + "x" +
                     std::to_string(expected_size) + "x" + std::to_string(cfg_.in_channels) +
                     " input, got " + std::to_string(input.height) + "x" +
                     std::to_string(input.width) + "x" + std::to_string(input.channels));
  std::vector<ag::Var> out;
  ag::Var x = ag::constant(tensor_to_matrix(input));
  int side = expected_size;
  for (int l = 0; l < cfg_.levels(); ++l) {
    ag::Var cols = ag::im2col(x, side, side, cfg_.kernel_sizes[l]);
    x = ag::gelu(ag::linear(cols, conv_weight_[l], conv_bias_[l]));
    x = ag::avg_pool2(x, side, side);
    side /= 2;
    out.push_back(x);
  }
  return out;
}

ObjectFeatures ImageBackbone::encode_objects(std::span<const ImageTensor> objects) const {
  if (objects.size() != kObjectsPerSample)
    throw ShapeError("encode_objects: expected exactly 3 object crops, got " +
                     std::to_string(objects.size()));
  ObjectFeatures out;
  for (std::size_t j = 0; j < kObjectsPerSample; ++j)
    out[j] = level_features(objects[j], cfg_.object_size);
  return out;
}

ag::Var ImageBackbone::encode_image(const ImageTensor& image) const {
  auto levels = level_features(image, cfg_.image_size);
  return ag::linear(ag::mean_rows(levels.back()), pool_weight_, pool_bias_);
}

TextEncoder::TextEncoder(TextEncoderConfig cfg, ParamStore& store, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const int d = cfg_.d_model;
  token_embedding_ = store.add_normal("text.token_embedding", cfg_.vocab_size, d, 1.0 / std::sqrt(d), rng);
  position_embedding_ = store.add_normal("text.position_embedding", cfg_.max_len, d, 1.0 / std::sqrt(d), rng);
  emb_ln_gamma_ = store.add_ones("text.embedding_ln.gamma", 1, d);
  emb_ln_beta_ = store.add_zeros("text.embedding_ln.beta", 1, d);
  for (int l = 0; l < cfg_.num_layers; ++l) {
    const std::string p = "text.layer" + std::to_string(l);
    Layer L;
    L.wq = store.add_weight(p + ".query.weight", d, d, rng);
    L.bq = store.add_zeros(p + ".query.bias", 1, d);
    L.wk = store.add_weight(p + ".key.weight", d, d, rng);
    L.wv = store.add_weight(p + ".value.weight", d, d, rng);
    L.bv = store.add_zeros(p + ".value.bias", 1, d);
    L.wo = store.add_weight(p + ".output.weight", d, d, rng);
    L.bo = store.add_zeros(p + ".output.bias", 1, d);
    L.ln1_gamma = store.add_ones(p + ".attention_ln.gamma", 1, d);
    L.ln1_beta = store.add_zeros(p + ".attention_ln.beta", 1, d);
    L.w1 = store.add_weight(p + ".ffn_in.weight", d, cfg_.ffn_dim, rng);
    L.b1 = store.add_zeros(p + ".ffn_in.bias", 1, cfg_.ffn_dim);
    L.w2 = store.add_weight(p + ".ffn_out.weight", cfg_.ffn_dim, d, rng);
    L.b2 = store.add_zeros(p + ".ffn_out.bias", 1, d);
    L.ln2_gamma = store.add_ones(p + ".ffn_ln.gamma", 1, d);
    L.ln2_beta = store.add_zeros(p + ".ffn_ln.beta", 1, d);
    layers_.push_back(std::move(L));
  }
}

ag::Var TextEncoder::self_attention(const Layer& layer, const ag::Var& x) const {
  const int heads = cfg_.num_heads;
  const int dh = cfg_.d_model / heads;
  const double inv_sqrt = 1.0 / std::sqrt(double(dh));
  ag::Var q = ag::linear(x, layer.wq, layer.bq);
  // No key bias: it shifts a whole score row and the softmax cancels it.
  ag::Var k = ag::matmul(x, layer.wk);
  ag::Var v = ag::linear(x, layer.wv, layer.bv);
  std::vector<ag::Var> outs;
  outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    ag::Var qh = ag::slice_cols(q, h * dh, dh);
    ag::Var kh = ag::slice_cols(k, h * dh, dh);
    ag::Var vh = ag::slice_cols(v, h * dh, dh);
    ag::Var scores = ag::scale(ag::matmul(qh, ag::transpose(kh)), inv_sqrt);
    outs.push_back(ag::matmul(ag::softmax_rows(scores), vh));
  }
  return ag::linear(ag::concat_cols(outs), layer.wo, layer.bo);
}

ag::Var TextEncoder::run_layer(const Layer& layer, const ag::Var& x, const ForwardContext& ctx) const {
  auto drop = [&](const ag::Var& v) {
    return ctx.train ? ag::dropout(v, cfg_.dropout, *ctx.rng) : v;
  };
  ag::Var h = ag::layer_norm_rows(x + drop(self_attention(layer, x)), layer.ln1_gamma, layer.ln1_beta);
  ag::Var f = ag::linear(ag::gelu(ag::linear(h, layer.w1, layer.b1)), layer.w2, layer.b2);
  return ag::layer_norm_rows(h + drop(f), layer.ln2_gamma, layer.ln2_beta);
}

ag::Var TextEncoder::encode(std::span<const int> tokens, std::span<const ag::Var> prompts,
                            const ForwardContext& ctx) const {
  const auto n = static_cast<Eigen::Index>(tokens.size());
  if (n < 1 || n > cfg_.max_len)
    throw ShapeError("text encoder: sequence length " + std::to_string(n) + " outside [1, " +
                     std::to_string(cfg_.max_len) + "]");
  for (int t : tokens)
    if (t < 0 || t >= cfg_.vocab_size)
      throw ShapeError("text encoder: token id " + std::to_string(t) + " outside vocabulary");
  if (!prompts.empty()) {
    if (static_cast<int>(prompts.size()) != cfg_.num_layers)
      throw ShapeError("text encoder: expected one prompt per layer (" +
                       std::to_string(cfg_.num_layers) + "), got " + std::to_string(prompts.size()));
    for (const auto& p : prompts)
      if (p.rows() != 1 || p.cols() != cfg_.d_model)
        throw ShapeError("text encoder: prompt must be 1 x d_model");
  }

  std::vector<int> positions(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) positions[static_cast<std::size_t>(i)] = static_cast<int>(i);
  ag::Var x = ag::gather_rows(token_embedding_, tokens) + ag::gather_rows(position_embedding_, positions);
  x = ag::layer_norm_rows(x, emb_ln_gamma_, emb_ln_beta_);
  if (ctx.train) x = ag::dropout(x, cfg_.dropout, *ctx.rng);

  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (prompts.empty()) {
      x = run_layer(layers_[l], x, ctx);
    } else {
      const ag::Var parts[] = {prompts[l], x};
      ag::Var y = run_layer(layers_[l], ag::concat_rows(parts), ctx);
      x = ag::slice_rows(y, 1, n);
    }
  }
  return x;
}

}  // namespace mmie
