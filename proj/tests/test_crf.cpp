// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include <functional>

#include "crf.hpp"
#include "errors.hpp"
#include "test_support.hpp"

using namespace mmie;
using mmie::testing::random_matrix;

namespace {

crf::Potentials random_potentials(int n, int L, Rng& rng) {
  crf::Potentials p;
  p.emissions = random_matrix(n, L, rng, 1.5);
  p.transitions = random_matrix(L, L, rng, 1.5);
  p.start = random_matrix(1, L, rng, 1.5).row(0);
  p.end = random_matrix(1, L, rng, 1.5).row(0);
  return p;
}

// Exhaustive reference: every one of the L^n label sequences.
struct Enumeration {
  double log_z = 0.0;
  double best = 0.0;
  std::vector<int> argmax;
};

double score_of(const crf::Potentials& p, const std::vector<int>& y) {
  double s = p.start(y.front()) + p.end(y.back());
  for (std::size_t i = 0; i < y.size(); ++i) {
    s += p.emissions(Eigen::Index(i), y[i]);
    if (i) s += p.transitions(y[i - 1], y[i]);
  }
  return s;
}

void for_each_sequence(int n, int L, const std::function<void(const std::vector<int>&)>& fn) {
  long long total = 1;
  for (int i = 0; i < n; ++i) total *= L;
  std::vector<int> y(static_cast<std::size_t>(n));
  for (long long code = 0; code < total; ++code) {
    long long c = code;
    for (int i = n - 1; i >= 0; --i) {
      y[static_cast<std::size_t>(i)] = static_cast<int>(c % L);
      c /= L;
    }
    fn(y);
  }
}

Enumeration enumerate_all(const crf::Potentials& p) {
  Enumeration e;
  std::vector<double> scores;
  e.best = -1e300;
  for_each_sequence(static_cast<int>(p.length()), static_cast<int>(p.tags()), [&](const std::vector<int>& y) {
    const double s = score_of(p, y);
    scores.push_back(s);
    if (s > e.best) {
      e.best = s;
      e.argmax = y;
    }
  });
  double acc = 0.0;
  for (double s : scores) acc += std::exp(s - e.best);
  e.log_z = e.best + std::log(acc);
  return e;
}

}  // namespace

TEST_CASE("zero potentials, n = 2, L = 2: every path has probability 1/4") {
  crf::Potentials p{Matrix::Zero(2, 2), Matrix::Zero(2, 2), RowVector::Zero(2), RowVector::Zero(2)};
  for (const std::vector<int>& y : {std::vector<int>{0, 0}, {0, 1}, {1, 0}, {1, 1}})
    CHECK(crf::nll(p, y) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  CHECK(crf::log_partition(p) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
}

TEST_CASE("forward algorithm and Viterbi against enumeration") {
  Rng rng(1);
  double worst_nll = 0.0;
  double worst_vit = 0.0;
  double worst_norm = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.integer(1, 4);
    const int L = rng.integer(1, 4);
    const crf::Potentials p = random_potentials(n, L, rng);
    const Enumeration e = enumerate_all(p);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (auto& t : y) t = rng.integer(0, L - 1);
    worst_nll = std::max(worst_nll, std::abs(crf::nll(p, y) - (e.log_z - score_of(p, y))));
    CHECK(crf::log_partition(p) == doctest::Approx(e.log_z).epsilon(1e-12));
    worst_vit = std::max(worst_vit, std::abs(score_of(p, crf::viterbi(p)) - e.best));
    double total = 0.0;
    for_each_sequence(n, L, [&](const std::vector<int>& seq) { total += std::exp(-crf::nll(p, seq)); });
    worst_norm = std::max(worst_norm, std::abs(total - 1.0));
  }
  CHECK(worst_nll < 1e-8);
  CHECK(worst_vit < 1e-8);
  CHECK(worst_norm < 1e-6);
}

TEST_CASE("analytic potential gradients match central differences") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = rng.integer(1, 5);
    const int L = rng.integer(2, 4);
    const crf::Potentials p = random_potentials(n, L, rng);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (auto& t : y) t = rng.integer(0, L - 1);
    ag::Var em = ag::parameter(p.emissions);
    ag::Var tr = ag::parameter(p.transitions);
    ag::Var st = ag::parameter(Matrix(p.start));
    ag::Var en = ag::parameter(Matrix(p.end));
    auto loss = [&] { return crf::nll(em, tr, st, en, y); };
    CHECK(mmie::testing::max_grad_error(loss, {em, tr, st, en}, 1e-5) < 1e-5);

    crf::Gradients g;
    CHECK(crf::nll_with_gradients(p, y, g) == doctest::Approx(crf::nll(p, y)).epsilon(1e-14));
    // Emission gradient rows are (marginals - one-hot), so each sums to zero.
    CHECK(g.emissions.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("Viterbi special cases") {
  SUBCASE("strong emissions for one tag") {
    Matrix em = Matrix::Zero(5, 3);
    em.col(2).setConstant(10.0);
    crf::Potentials p{em, Matrix::Zero(3, 3), RowVector::Zero(3), RowVector::Zero(3)};
    CHECK(crf::viterbi(p) == std::vector<int>(5, 2));
  }
  SUBCASE("single position picks argmax of start + emission + end") {
    crf::Potentials p{(Matrix(1, 3) << 0.1, 0.5, 0.2).finished(), Matrix::Zero(3, 3),
                      (RowVector(3) << 0.3, 0.0, 0.0).finished(), (RowVector(3) << 0.0, 0.0, 0.4).finished()};
    CHECK(crf::viterbi(p) == std::vector<int>{2});
  }
  SUBCASE("ties go to the lowest tag id") {
    crf::Potentials p{Matrix::Zero(3, 3), Matrix::Zero(3, 3), RowVector::Zero(3), RowVector::Zero(3)};
    CHECK(crf::viterbi(p) == std::vector<int>{0, 0, 0});
  }
}

TEST_CASE("input validation") {
  crf::Potentials p{Matrix::Zero(2, 2), Matrix::Zero(3, 3), RowVector::Zero(2), RowVector::Zero(2)};
  CHECK_THROWS_AS(crf::log_partition(p), ShapeError);
  crf::Potentials ok{Matrix::Zero(2, 2), Matrix::Zero(2, 2), RowVector::Zero(2), RowVector::Zero(2)};
  CHECK_THROWS_AS(crf::nll(ok, std::vector<int>{0}), ShapeError);
  CHECK_THROWS_AS(crf::nll(ok, std::vector<int>{0, 2}), ShapeError);
}
