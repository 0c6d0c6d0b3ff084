// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include "errors.hpp"
#include "heads.hpp"
#include "intrafusion.hpp"
#include "test_support.hpp"

using namespace mmie;
using mmie::testing::random_matrix;

TEST_CASE("CRF head: mixed targets reduce to hard targets") {
  ParamStore store;
  Rng rng(1);
  CrfHead head(6, 5, true, store, rng);
  store.find("crf.transitions").mutable_value() = random_matrix(5, 5, rng);
  const ag::Var states = ag::constant(random_matrix(4, 6, rng));
  const std::vector<int> a{1, 2, 0, 3};
  const std::vector<int> b{0, 0, 3, 4};

  const double hard_a = head.nll(states, HardSeq{a}).scalar();
  CHECK(head.nll(states, MixedTarget{1.0, HardSeq{a}, HardSeq{b}}).scalar() == hard_a);

  const double hard_b = head.nll(states, HardSeq{b}).scalar();
  CHECK(head.nll(states, MixedTarget{0.3, HardSeq{a}, HardSeq{b}}).scalar() ==
        doctest::Approx(0.3 * hard_a + 0.7 * hard_b).epsilon(1e-14));
  CHECK(head.normalized_nll(states, HardSeq{a}).scalar() == doctest::Approx(hard_a / 4).epsilon(1e-14));

  // A shorter component is scored on the leading rows only.
  const std::vector<int> shorter{1, 2};
  const ag::Var lead = ag::slice_rows(states, 0, 2);
  CHECK(head.nll(states, MixedTarget{0.0, HardSeq{a}, HardSeq{shorter}}).scalar() ==
        doctest::Approx(head.nll(lead, HardSeq{shorter}).scalar()).epsilon(1e-14));

  CHECK_THROWS_AS(head.nll(states, HardSeq{{1, 2}}), ShapeError);
  CHECK_THROWS_AS(head.nll(states, HardClass{1}), ShapeError);
}

TEST_CASE("CRF head: constrained decoding never emits an invalid BIO sequence") {
  ParamStore store;
  Rng rng(2);
  CrfHead head(4, 7, true, store, rng);
  for (int trial = 0; trial < 100; ++trial) {
    store.find("crf.emission.weight").mutable_value() = random_matrix(4, 7, rng, 3.0);
    const auto tags = head.decode(ag::constant(random_matrix(rng.integer(1, 8), 4, rng)));
    CHECK(BioScheme::is_valid_sequence(tags));
  }
  // Without constraints invalid sequences are reachable.
  ParamStore open_store;
  CrfHead open(4, 7, false, open_store, rng);
  open_store.find("crf.emission.bias").mutable_value() = (Matrix(1, 7) << 0, 0, 5, 0, 0, 0, 0).finished();
  open_store.find("crf.emission.weight").mutable_value().setZero();
  CHECK(open.decode(ag::constant(Matrix::Zero(3, 4))) == std::vector<int>{2, 2, 2});
}

TEST_CASE("CRF head gradients") {
  ParamStore store;
  Rng rng(3);
  CrfHead head(3, 5, true, store, rng);
  store.find("crf.transitions").mutable_value() = random_matrix(5, 5, rng, 0.5);
  ag::Var states = ag::parameter(random_matrix(4, 3, rng));
  const TargetSpec target = MixedTarget{0.4, HardSeq{{1, 2, 0, 3}}, HardSeq{{0, 3, 4}}};
  auto loss = [&] { return head.normalized_nll(states, target); };
  std::vector<ag::Var> params{states};
  for (const auto& [name, v] : store.entries()) params.push_back(v);
  CHECK(mmie::testing::max_grad_error(loss, params) < 1e-5);
}

TEST_CASE("relation head") {
  ParamStore store;
  Rng rng(4);
  RelationHead head(3, 4, store, rng);
  const ag::Var states = ag::constant(random_matrix(6, 3, rng));

  const Matrix pair = RelationHead::pair_vector(states, {1, 2}, {4, 6}).value();
  CHECK(pair.leftCols(3) == states.value().row(1));
  const Matrix tail_mean = states.value().middleRows(4, 2).colwise().mean();
  CHECK((pair.rightCols(3) - tail_mean).cwiseAbs().maxCoeff() < 1e-15);

  const Matrix swapped = head.re_logits(states, {4, 6}, {1, 2}).value();
  CHECK((swapped - head.re_logits(states, {1, 2}, {4, 6}).value()).cwiseAbs().maxCoeff() > 1e-6);

  store.find("relation.weight").mutable_value().setZero();
  const Matrix probs = ag::softmax_rows(head.re_logits(states, {1, 2}, {4, 6})).value();
  CHECK((probs.array() - 0.25).abs().maxCoeff() < 1e-15);
  CHECK(head.predict(RelationHead::pair_vector(states, {0, 1}, {2, 3})) == 0);

  const ag::Var p = ag::constant(pair);
  CHECK(head.loss(p, HardClass{2}).scalar() == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  CHECK(head.loss(p, MixedTarget{0.25, HardClass{1}, HardClass{2}}).scalar() ==
        doctest::Approx(std::log(4.0)).epsilon(1e-14));
  CHECK_THROWS_AS(RelationHead::pair_vector(states, {5, 7}, {0, 1}), ShapeError);
  CHECK_THROWS_AS(head.loss(p, HardSeq{{0}}), ShapeError);
}

TEST_CASE("relation loss gradient") {
  ParamStore store;
  Rng rng(5);
  RelationHead head(3, 5, store, rng);
  ag::Var states = ag::parameter(random_matrix(5, 3, rng));
  auto loss = [&] {
    return head.loss(RelationHead::pair_vector(states, {0, 2}, {3, 5}), MixedTarget{0.7, HardClass{4}, HardClass{1}});
  };
  CHECK(mmie::testing::max_grad_error(loss, {states, head.weight()}) < 1e-6);
}

TEST_CASE("total loss") {
  const ag::Var task = ag::scalar_constant(1.0);
  const ag::Var sem = ag::scalar_constant(0.4);
  CHECK(total_loss(task, sem, 0.5).scalar() == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(total_loss(task, sem, 0.0).scalar() == 1.0);

  // Gradient of the total is grad(task) + 0.5 grad(semantic).
  Rng rng(6);
  ag::Var x = ag::parameter(random_matrix(1, 4, rng));
  const ag::Var zero = ag::constant(Matrix::Zero(1, 4));
  auto task_of = [&] { return ag::sum_all(ag::mul(x, x)); };
  auto sem_of = [&] { return semantic_loss({x, zero}, {zero, zero}); };
  ag::backward(task_of());
  const Matrix g_task = x.grad();
  x.zero_grad();
  ag::backward(sem_of());
  const Matrix g_sem = x.grad();
  x.zero_grad();
  ag::backward(total_loss(task_of(), sem_of(), 0.5));
  CHECK((x.grad() - (g_task + 0.5 * g_sem)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(mmie::testing::max_grad_error([&] { return total_loss(task_of(), sem_of(), 0.5); }, {x}) < 1e-6);
}
