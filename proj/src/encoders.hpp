// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MMIE_ENCODERS_HPP
#define MMIE_ENCODERS_HPP

#include <array>
#include <span>
#include <vector>

#include "autograd.hpp"
#include "context.hpp"
#include "params.hpp"
#include "synthgen.hpp"

namespace mmie {

struct TextEncoderConfig {
  int vocab_size = 200;
  int d_model = 64;
  int num_layers = 2;
  int num_heads = 4;
  int max_len = kMaxSequenceLength;
  int ffn_dim = 128;
  double dropout = 0.1;

  void validate() const;
};

struct ImageBackboneConfig {
  int in_channels = 3;
  std::vector<int> channels{16, 32};  // one entry per level
  std::vector<int> kernel_sizes{3, 3};
  int pooled_dim = 32;
  int image_size = 16;
  int object_size = 8;

  int levels() const { return static_cast<int>(channels.size()); }
  void validate() const;
};

// Per-object feature stacks: features[j][l] is object j at backbone level l,
// a (side*side) x channels[l] matrix.
using ObjectFeatures = std::array<std::vector<ag::Var>, kObjectsPerSample>;

// Small convolutional backbone: each level is conv(k x k, same padding) ->
// GELU -> 2x2 average pool. One parameter set serves object crops and the
// whole image.
class ImageBackbone {
 public:
  ImageBackbone(ImageBackboneConfig cfg, ParamStore& store, Rng& rng);

  // Hidden state after every level for a single input grid.
  std::vector<ag::Var> level_features(const ImageTensor& input, int expected_size) const;

  ObjectFeatures encode_objects(std::span<const ImageTensor> objects) const;
  // Global average pool of the last level followed by a linear map.
  ag::Var encode_image(const ImageTensor& image) const;

  const ImageBackboneConfig& config() const { return cfg_; }

 private:
  ImageBackboneConfig cfg_;
  std::vector<ag::Var> conv_weight_;
  std::vector<ag::Var> conv_bias_;
  ag::Var pool_weight_;
  ag::Var pool_bias_;
};

// Post-norm transformer encoder with learned absolute positions. When prompt
// vectors are supplied, layer l sees [r^(l); X] and only the word rows are
// carried forward.
class TextEncoder {
 public:
  TextEncoder(TextEncoderConfig cfg, ParamStore& store, Rng& rng);

  ag::Var encode(std::span<const int> tokens, std::span<const ag::Var> prompts,
                 const ForwardContext& ctx) const;
  ag::Var encode(std::span<const int> tokens, const ForwardContext& ctx) const {
    return encode(tokens, {}, ctx);
  }

  const TextEncoderConfig& config() const { return cfg_; }

 private:
  struct Layer {
    ag::Var wq, bq, wk, wv, bv, wo, bo;
    ag::Var ln1_gamma, ln1_beta;
    ag::Var w1, b1, w2, b2;
    ag::Var ln2_gamma, ln2_beta;
  };

  ag::Var self_attention(const Layer& layer, const ag::Var& x) const;
  ag::Var run_layer(const Layer& layer, const ag::Var& x, const ForwardContext& ctx) const;

  TextEncoderConfig cfg_;
  ag::Var token_embedding_;
  ag::Var position_embedding_;
  ag::Var emb_ln_gamma_, emb_ln_beta_;
  std::vector<Layer> layers_;
};

Matrix tensor_to_matrix(const ImageTensor& t);

}  // namespace mmie

#endif  // MMIE_ENCODERS_HPP
