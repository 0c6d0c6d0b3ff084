// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

// Minimal reverse-mode automatic differentiation over dense row-major double
// matrices. A graph is built eagerly by the operations below and consumed by
// backward(); parameters are long-lived leaf nodes whose gradients accumulate
// until zero_grad().

#ifndef MMIE_AUTOGRAD_HPP
#define MMIE_AUTOGRAD_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace mmie {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

class Rng;

namespace ag {

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  void accumulate(const Matrix& g);
  bool has_grad() const { return grad.size() != 0; }
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  // Zero-filled when no gradient has reached this node.
  Matrix grad() const;
  void zero_grad() { node_->grad.resize(0, 0); }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double scalar() const { return node_->value(0, 0); }
  bool requires_grad() const { return node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

Var constant(Matrix value);
Var parameter(Matrix value);
Var scalar_constant(double v);

// Runs reverse accumulation from a 1x1 output.
void backward(const Var& output);

// Generic node construction used by the fused operations in other modules.
Var make_result(Matrix value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn);

// Elementwise and linear algebra.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_row(const Var& a, const Var& row);  // row is 1 x cols, broadcast over rows
Var linear(const Var& x, const Var& weight, const Var& bias);

Var tanh(const Var& a);
Var gelu(const Var& a);
Var clamp(const Var& a, double lo, double hi);

Var softmax_rows(const Var& a);
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-12);

// Structural.
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var pad_rows(const Var& a, Eigen::Index rows);  // zero rows appended
Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols);
Var gather_rows(const Var& table, std::span<const int> ids);
// out[i * b.rows() + j] = a[i] + b[j]
Var pairwise_add(const Var& a, const Var& b);

// Reductions.
Var mean_rows(const Var& a);  // 1 x cols
Var sum_all(const Var& a);
Var mean_all(const Var& a);

// Image ops over (height*width) x channels matrices, row index = y * width + x.
Var im2col(const Var& x, int height, int width, int kernel);  // same padding, stride 1
Var avg_pool2(const Var& x, int height, int width);

Var dropout(const Var& a, double rate, Rng& rng);

// Fused losses. Both return 1x1.
Var cross_entropy(const Var& logits, int target);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

}  // namespace ag
}  // namespace mmie

#endif  // MMIE_AUTOGRAD_HPP
