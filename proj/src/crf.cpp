// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#include "crf.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "errors.hpp"

namespace mmie::crf {

namespace {

double log_sum_exp(const Eigen::Ref<const RowVector>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

void check_tags(const Potentials& p, std::span<const int> tags) {
  if (static_cast<Eigen::Index>(tags.size()) != p.length())
    throw ShapeError("crf: target length " + std::to_string(tags.size()) + " differs from sequence length " +
                     std::to_string(p.length()));
  for (int t : tags)
    if (t < 0 || t >= p.tags()) throw ShapeError("crf: invalid tag id " + std::to_string(t));
}

// alpha(i, j): log-sum of all prefixes ending in tag j at position i.
Matrix forward_scores(const Potentials& p) {
  const Eigen::Index n = p.length();
  const Eigen::Index L = p.tags();
  Matrix alpha(n, L);
  alpha.row(0) = p.start + p.emissions.row(0);
  RowVector tmp(L);
  for (Eigen::Index i = 1; i < n; ++i)
    for (Eigen::Index j = 0; j < L; ++j) {
      tmp = alpha.row(i - 1) + p.transitions.col(j).transpose();
      alpha(i, j) = p.emissions(i, j) + log_sum_exp(tmp);
    }
  return alpha;
}

// beta(i, j): log-sum of all suffixes after position i given tag j there.
Matrix backward_scores(const Potentials& p) {
  const Eigen::Index n = p.length();
  const Eigen::Index L = p.tags();
  Matrix beta(n, L);
  beta.row(n - 1) = p.end;
  RowVector tmp(L);
  for (Eigen::Index i = n - 2; i >= 0; --i)
    for (Eigen::Index k = 0; k < L; ++k) {
      tmp = p.transitions.row(k) + p.emissions.row(i + 1) + beta.row(i + 1);
      beta(i, k) = log_sum_exp(tmp);
    }
  return beta;
}

}  // namespace

void Potentials::validate() const {
  const Eigen::Index L = tags();
  if (length() < 1) throw ShapeError("crf: empty sequence");
  if (L < 1 || transitions.rows() != L || transitions.cols() != L || start.cols() != L || end.cols() != L)
    throw ShapeError("crf: potential shapes disagree on the tag count");
}

double path_score(const Potentials& p, std::span<const int> tags) {
  p.validate();
  check_tags(p, tags);
  double s = p.start(tags[0]) + p.end(tags.back());
  for (std::size_t i = 0; i < tags.size(); ++i) {
    s += p.emissions(static_cast<Eigen::Index>(i), tags[i]);
    if (i > 0) s += p.transitions(tags[i - 1], tags[i]);
  }
  return s;
}

double log_partition(const Potentials& p) {
  p.validate();
  const Matrix alpha = forward_scores(p);
  return log_sum_exp(alpha.row(p.length() - 1) + p.end);
}

double nll(const Potentials& p, std::span<const int> tags) {
  return log_partition(p) - path_score(p, tags);
}

double nll_with_gradients(const Potentials& p, std::span<const int> tags, Gradients& g) {
  p.validate();
  check_tags(p, tags);
  const Eigen::Index n = p.length();
  const Eigen::Index L = p.tags();
  const Matrix alpha = forward_scores(p);
  const Matrix beta = backward_scores(p);
  const double log_z = log_sum_exp(alpha.row(n - 1) + p.end);

  g.emissions = ((alpha + beta).array() - log_z).exp().matrix();
  g.start = g.emissions.row(0);
  g.end = g.emissions.row(n - 1);
  g.transitions = Matrix::Zero(L, L);
  for (Eigen::Index i = 1; i < n; ++i)
    for (Eigen::Index k = 0; k < L; ++k)
      for (Eigen::Index j = 0; j < L; ++j)
        g.transitions(k, j) +=
            std::exp(alpha(i - 1, k) + p.transitions(k, j) + p.emissions(i, j) + beta(i, j) - log_z);

  for (Eigen::Index i = 0; i < n; ++i) {
    g.emissions(i, tags[static_cast<std::size_t>(i)]) -= 1.0;
    if (i > 0) g.transitions(tags[static_cast<std::size_t>(i - 1)], tags[static_cast<std::size_t>(i)]) -= 1.0;
  }
  g.start(tags.front()) -= 1.0;
  g.end(tags.back()) -= 1.0;
  return log_z - path_score(p, tags);
}

std::vector<int> viterbi(const Potentials& p) {
  p.validate();
  const Eigen::Index n = p.length();
  const Eigen::Index L = p.tags();
  Matrix best(n, L);
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> back(n, L);
  best.row(0) = p.start + p.emissions.row(0);
  for (Eigen::Index i = 1; i < n; ++i)
    for (Eigen::Index j = 0; j < L; ++j) {
      double top = -std::numeric_limits<double>::infinity();
      int arg = 0;
      for (Eigen::Index k = 0; k < L; ++k) {
        const double s = best(i - 1, k) + p.transitions(k, j);
        if (s > top) {
          top = s;
          arg = static_cast<int>(k);
        }
      }
      best(i, j) = top + p.emissions(i, j);
      back(i, j) = arg;
    }
  std::vector<int> path(static_cast<std::size_t>(n));
  double top = -std::numeric_limits<double>::infinity();
  int last = 0;
  for (Eigen::Index j = 0; j < L; ++j) {
    const double s = best(n - 1, j) + p.end(j);
    if (s > top) {
      top = s;
      last = static_cast<int>(j);
    }
  }
  path.back() = last;
  for (Eigen::Index i = n - 1; i > 0; --i)
    path[static_cast<std::size_t>(i - 1)] = back(i, path[static_cast<std::size_t>(i)]);
  return path;
}

ag::Var nll(const ag::Var& emissions, const ag::Var& transitions, const ag::Var& start,
            const ag::Var& end, std::span<const int> tags) {
  Potentials p{emissions.value(), transitions.value(), start.value().row(0), end.value().row(0)};
  auto grads = std::make_shared<Gradients>();
  Matrix out(1, 1);
  out(0, 0) = nll_with_gradients(p, tags, *grads);
  return ag::make_result(std::move(out), {emissions, transitions, start, end}, [grads](ag::Node& self) {
    const double g = self.grad(0, 0);
    if (self.inputs[0]->requires_grad) self.inputs[0]->accumulate(grads->emissions * g);
    if (self.inputs[1]->requires_grad) self.inputs[1]->accumulate(grads->transitions * g);
    if (self.inputs[2]->requires_grad) self.inputs[2]->accumulate(grads->start * g);
    if (self.inputs[3]->requires_grad) self.inputs[3]->accumulate(grads->end * g);
  });
}

}  // namespace mmie::crf
