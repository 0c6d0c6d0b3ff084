// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

// Linear-chain CRF over n positions and L tags. Path score:
//   start[y0] + sum_i emissions[i][y_i] + sum_i transitions[y_{i-1}][y_i] + end[y_{n-1}]

#ifndef MMIE_CRF_HPP
#define MMIE_CRF_HPP

#include <span>
#include <vector>

#include "autograd.hpp"

namespace mmie::crf {

struct Potentials {
  Matrix emissions;    // n x L
  Matrix transitions;  // L x L, row = previous tag
  RowVector start;     // 1 x L
  RowVector end;       // 1 x L

  Eigen::Index length() const { return emissions.rows(); }
  Eigen::Index tags() const { return emissions.cols(); }
  void validate() const;
};

double path_score(const Potentials& p, std::span<const int> tags);
double log_partition(const Potentials& p);
double nll(const Potentials& p, std::span<const int> tags);

struct Gradients {
  Matrix emissions;
  Matrix transitions;
  RowVector start;
  RowVector end;
};

// NLL and its gradient with respect to every potential (forward-backward).
double nll_with_gradients(const Potentials& p, std::span<const int> tags, Gradients& grads);

// Viterbi path; among equal-scoring predecessors the lowest tag id wins.
std::vector<int> viterbi(const Potentials& p);

// Differentiable NLL, 1x1. `transitions`, `start` and `end` already include
// any constant constraint scores.
ag::Var nll(const ag::Var& emissions, const ag::Var& transitions, const ag::Var& start,
            const ag::Var& end, std::span<const int> tags);

}  // namespace mmie::crf

#endif  // MMIE_CRF_HPP
