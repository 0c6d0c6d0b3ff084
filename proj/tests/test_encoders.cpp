// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include "encoders.hpp"
#include "errors.hpp"
#include "test_support.hpp"

using namespace mmie;
using mmie::testing::random_matrix;

namespace {

ImageTensor filled(int side, int channels, double value) {
  ImageTensor t{side, side, channels, std::vector<double>(std::size_t(side) * side * channels, value)};
  return t;
}

ImageTensor noise(int side, int channels, Rng& rng) {
  ImageTensor t = filled(side, channels, 0.0);
  for (auto& v : t.data) v = rng.uniform();
  return t;
}

struct Fixture {
  ParamStore store;
  Rng rng{11};
  ImageBackboneConfig image_cfg;
  TextEncoderConfig text_cfg;
  std::unique_ptr<ImageBackbone> backbone;
  std::unique_ptr<TextEncoder> text;

  Fixture() {
    text_cfg.d_model = 16;
    text_cfg.num_heads = 2;
    text_cfg.ffn_dim = 24;
    text_cfg.vocab_size = 50;
    image_cfg.channels = {4, 6};
    backbone = std::make_unique<ImageBackbone>(image_cfg, store, rng);
    text = std::make_unique<TextEncoder>(text_cfg, store, rng);
  }
};

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("object features: zero crops, identical crops and level shapes") {
  Fixture f;
  const std::array<ImageTensor, 3> zeros{filled(8, 3, 0.0), filled(8, 3, 0.0), filled(8, 3, 0.0)};
  const ObjectFeatures zf = f.backbone->encode_objects(zeros);
  for (const auto& stack : zf)
    for (const auto& level : stack) CHECK(max_abs(level.value()) == 0.0);

  Rng rng(2);
  const ImageTensor crop = noise(8, 3, rng);
  const std::array<ImageTensor, 3> same{crop, crop, crop};
  const ObjectFeatures sf = f.backbone->encode_objects(same);
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK(sf[0][l].value() == sf[1][l].value());
    CHECK(sf[0][l].value() == sf[2][l].value());
  }
  // Level l halves the side l + 1 times and carries channels[l] features.
  CHECK(sf[0][0].rows() == 16);
  CHECK(sf[0][0].cols() == 4);
  CHECK(sf[0][1].rows() == 4);
  CHECK(sf[0][1].cols() == 6);

  const std::array<ImageTensor, 2> two{crop, crop};
  CHECK_THROWS_AS(f.backbone->encode_objects(two), ShapeError);
  const std::array<ImageTensor, 3> wrong{crop, crop, filled(4, 3, 0.0)};
  CHECK_THROWS_AS(f.backbone->encode_objects(wrong), ShapeError);
}

TEST_CASE("image embedding: zero image, pixel sensitivity, shared weights") {
  Fixture f;
  CHECK(max_abs(f.backbone->encode_image(filled(16, 3, 0.0)).value()) == 0.0);
  CHECK(f.backbone->encode_image(filled(16, 3, 0.0)).cols() == f.image_cfg.pooled_dim);

  Rng rng(3);
  ImageTensor img = noise(16, 3, rng);
  const Matrix before = f.backbone->encode_image(img).value();
  img.data[(5 * 16 + 7) * 3 + 1] += 1e-3;
  const Matrix after = f.backbone->encode_image(img).value();
  CHECK(max_abs(after - before) > 0.0);

  const ImageTensor crop = noise(8, 3, rng);
  const std::array<ImageTensor, 3> objs{crop, crop, crop};
  const Matrix obj_before = f.backbone->encode_objects(objs)[0][0].value();
  const Matrix img_before = f.backbone->encode_image(img).value();
  f.store.find("backbone.level0.weight").mutable_value()(0, 0) += 0.5;
  CHECK(max_abs(f.backbone->encode_objects(objs)[0][0].value() - obj_before) > 0.0);
  CHECK(max_abs(f.backbone->encode_image(img).value() - img_before) > 0.0);
  CHECK_THROWS_AS(f.backbone->encode_image(filled(8, 3, 0.0)), ShapeError);
}

TEST_CASE("text encoder: prompt rows are stripped and prompts reach the output") {
  Fixture f;
  Rng rng(4);
  const auto ctx = ForwardContext::eval();
  for (int n : {1, 5, 32}) {
    std::vector<int> tokens(static_cast<std::size_t>(n));
    for (auto& t : tokens) t = rng.integer(0, 49);
    const std::vector<ag::Var> prompts{ag::constant(random_matrix(1, 16, rng)),
                                       ag::constant(random_matrix(1, 16, rng))};
    CHECK(f.text->encode(tokens, prompts, ctx).rows() == n);
    CHECK(f.text->encode(tokens, ctx).rows() == n);
  }

  const std::vector<int> tokens{3, 9, 27, 1};
  const std::vector<ag::Var> p1{ag::constant(random_matrix(1, 16, rng)), ag::constant(random_matrix(1, 16, rng))};
  const std::vector<ag::Var> p2{ag::constant(random_matrix(1, 16, rng)), ag::constant(random_matrix(1, 16, rng))};
  CHECK(max_abs(f.text->encode(tokens, p1, ctx).value() - f.text->encode(tokens, p2, ctx).value()) > 1e-6);
  CHECK(f.text->encode(tokens, p1, ctx).value() == f.text->encode(tokens, p1, ctx).value());

  const std::vector<ag::Var> one{p1[0]};
  CHECK_THROWS_AS(f.text->encode(tokens, one, ctx), ShapeError);
  const std::vector<int> bad{3, 50};
  CHECK_THROWS_AS(f.text->encode(bad, ctx), ShapeError);
  CHECK_THROWS_AS(f.text->encode(std::vector<int>(33, 1), ctx), ShapeError);
}

TEST_CASE("text encoder: zero prompt with zero value/output maps equals the prompt-free path") {
  ParamStore store;
  Rng rng(5);
  TextEncoderConfig cfg;
  cfg.d_model = 8;
  cfg.num_heads = 2;
  cfg.num_layers = 1;
  cfg.vocab_size = 20;
  TextEncoder enc(cfg, store, rng);
  for (const char* name : {"text.layer0.value.weight", "text.layer0.value.bias", "text.layer0.output.weight",
                           "text.layer0.output.bias"})
    store.find(name).mutable_value().setZero();
  const std::vector<int> tokens{1, 4, 7};
  const std::vector<ag::Var> prompt{ag::constant(Matrix::Zero(1, 8))};
  const auto ctx = ForwardContext::eval();
  CHECK(max_abs(enc.encode(tokens, prompt, ctx).value() - enc.encode(tokens, ctx).value()) < 1e-14);
}

TEST_CASE("text encoder: gradient with respect to the prompts") {
  Fixture f;
  Rng rng(6);
  ag::Var p0 = ag::parameter(random_matrix(1, 16, rng));
  ag::Var p1 = ag::parameter(random_matrix(1, 16, rng));
  const std::vector<int> tokens{2, 8, 13};
  const Matrix weights = random_matrix(3, 16, rng);
  auto loss = [&] {
    const std::vector<ag::Var> prompts{p0, p1};
    return ag::sum_all(ag::mul(f.text->encode(tokens, prompts, ForwardContext::eval()), ag::constant(weights)));
  };
  CHECK(mmie::testing::max_grad_error(loss, {p0, p1}) < 1e-4);
}

TEST_CASE("config validation") {
  TextEncoderConfig t;
  t.d_model = 10;
  t.num_heads = 4;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  ImageBackboneConfig i;
  i.kernel_sizes = {3};
  CHECK_THROWS_AS(i.validate(), ConfigError);
  i = ImageBackboneConfig{};
  i.object_size = 6;
  CHECK_THROWS_AS(i.validate(), ConfigError);
  i = ImageBackboneConfig{};
  i.kernel_sizes = {3, 4};
  CHECK_THROWS_AS(i.validate(), ConfigError);
}
