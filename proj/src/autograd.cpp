// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#include "autograd.hpp"

#include <cmath>
#include <unordered_set>

#include "errors.hpp"
#include "rng.hpp"

namespace mmie::ag {

namespace {

thread_local bool g_grad_enabled = true;

void check(bool cond, const char* what) {
  if (!cond) throw ShapeError(what);
}

inline Node& in(Node& self, std::size_t i) { return *self.inputs[i]; }

inline void push(Node& self, std::size_t i, const Matrix& g) {
  Node& n = *self.inputs[i];
  if (n.requires_grad) n.accumulate(g);
}

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Matrix Var::grad() const {
  if (node_->has_grad()) return node_->grad;
  return Matrix::Zero(node_->value.rows(), node_->value.cols());
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Var constant(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var parameter(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

Var scalar_constant(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Var make_result(Matrix value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& v : inputs) any = any || v.requires_grad();
    if (any) {
      n->requires_grad = true;
      n->inputs.reserve(inputs.size());
      for (auto& v : inputs) n->inputs.push_back(v.shared());
      n->backward_fn = std::move(backward_fn);
    }
  }
  return Var(std::move(n));
}

void backward(const Var& output) {
  check(output.rows() == 1 && output.cols() == 1, "backward: output must be 1x1");
  if (!output.requires_grad()) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(output.node(), 0);
  visited.insert(output.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  output.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->has_grad()) n->backward_fn(*n);
  }
}

Var matmul(const Var& a, const Var& b) {
  check(a.cols() == b.rows(), "matmul: inner dimensions differ");
  return make_result(a.value() * b.value(), {a, b}, [](Node& self) {
    if (in(self, 0).requires_grad) push(self, 0, self.grad * in(self, 1).value.transpose());
    if (in(self, 1).requires_grad) push(self, 1, in(self, 0).value.transpose() * self.grad);
  });
}

Var transpose(const Var& a) {
  return make_result(a.value().transpose(), {a},
                     [](Node& self) { push(self, 0, self.grad.transpose()); });
}

Var add(const Var& a, const Var& b) {
  check(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  return make_result(a.value() + b.value(), {a, b}, [](Node& self) {
    push(self, 0, self.grad);
    push(self, 1, self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  return make_result(a.value() - b.value(), {a, b}, [](Node& self) {
    push(self, 0, self.grad);
    push(self, 1, -self.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  check(a.rows() == b.rows() && a.cols() == b.cols(), "mul: shape mismatch");
  return make_result(a.value().cwiseProduct(b.value()), {a, b}, [](Node& self) {
    if (in(self, 0).requires_grad) push(self, 0, self.grad.cwiseProduct(in(self, 1).value));
    if (in(self, 1).requires_grad) push(self, 1, self.grad.cwiseProduct(in(self, 0).value));
  });
}

Var scale(const Var& a, double s) {
  return make_result(a.value() * s, {a}, [s](Node& self) { push(self, 0, self.grad * s); });
}

Var add_row(const Var& a, const Var& row) {
  check(row.rows() == 1 && row.cols() == a.cols(), "add_row: row shape mismatch");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make_result(std::move(out), {a, row}, [](Node& self) {
    push(self, 0, self.grad);
    if (in(self, 1).requires_grad) push(self, 1, self.grad.colwise().sum());
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  return add_row(matmul(x, weight), bias);
}

Var tanh(const Var& a) {
  Matrix out = a.value().array().tanh().matrix();
  return make_result(out, {a}, [out](Node& self) {
    push(self, 0, self.grad.cwiseProduct((1.0 - out.array().square()).matrix()));
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Var gelu(const Var& a) {
  const Matrix& x = a.value();
  Matrix t = (kGeluC * (x.array() + kGeluA * x.array().cube())).tanh().matrix();
  Matrix out = (0.5 * x.array() * (1.0 + t.array())).matrix();
  return make_result(std::move(out), {a}, [t = std::move(t)](Node& self) {
    const auto x = in(self, 0).value.array();
    const auto ta = t.array();
    Matrix d = (0.5 * (1.0 + ta) +
                0.5 * x * (1.0 - ta.square()) * kGeluC * (1.0 + 3.0 * kGeluA * x.square()))
                   .matrix();
    push(self, 0, self.grad.cwiseProduct(d));
  });
}

Var clamp(const Var& a, double lo, double hi) {
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return make_result(std::move(out), {a}, [lo, hi](Node& self) {
    const Matrix& x = in(self, 0).value;
    Matrix g = self.grad;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      const double v = x.data()[i];
      if (v < lo || v > hi) g.data()[i] = 0.0;
    }
    push(self, 0, g);
  });
}

Var softmax_rows(const Var& a) {
  Matrix out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double m = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return make_result(out, {a}, [out](Node& self) {
    Matrix g(out.rows(), out.cols());
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      const double dot = self.grad.row(r).dot(out.row(r));
      g.row(r) = out.row(r).cwiseProduct((self.grad.row(r).array() - dot).matrix());
    }
    push(self, 0, g);
  });
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Eigen::Index n = x.rows();
  const Eigen::Index c = x.cols();
  check(gamma.rows() == 1 && gamma.cols() == c && beta.rows() == 1 && beta.cols() == c,
        "layer_norm_rows: affine shape mismatch");
  Matrix xhat(n, c);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = x.value().row(r).mean();
    const double var = (x.value().row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.value().row(r).array() - mu) * inv_std(r);
  }
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix();
  out.rowwise() += beta.value().row(0);
  return make_result(std::move(out), {x, gamma, beta},
                     [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                       const Matrix& dy = self.grad;
                       const auto& g = in(self, 1).value;
                       if (in(self, 0).requires_grad) {
                         Matrix dxhat = (dy.array().rowwise() * g.row(0).array()).matrix();
                         Matrix dx(dy.rows(), dy.cols());
                         for (Eigen::Index r = 0; r < dy.rows(); ++r) {
                           const double m1 = dxhat.row(r).mean();
                           const double m2 = dxhat.row(r).dot(xhat.row(r)) / double(dy.cols());
                           dx.row(r) = ((dxhat.row(r).array() - m1 - xhat.row(r).array() * m2) *
                                        inv_std(r))
                                           .matrix();
                         }
                         push(self, 0, dx);
                       }
                       if (in(self, 1).requires_grad)
                         push(self, 1, dy.cwiseProduct(xhat).colwise().sum());
                       if (in(self, 2).requires_grad) push(self, 2, dy.colwise().sum());
                     });
}

Var concat_rows(std::span<const Var> parts) {
  check(!parts.empty(), "concat_rows: no inputs");
  const Eigen::Index c = parts[0].cols();
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    check(p.cols() == c, "concat_rows: column mismatch");
    total += p.rows();
  }
  Matrix out(total, c);
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    out.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  return make_result(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
                     [offsets = std::move(offsets)](Node& self) {
                       for (std::size_t i = 0; i < self.inputs.size(); ++i) {
                         if (!in(self, i).requires_grad) continue;
                         push(self, i, self.grad.middleRows(offsets[i], in(self, i).value.rows()));
                       }
                     });
}

Var concat_cols(std::span<const Var> parts) {
  check(!parts.empty(), "concat_cols: no inputs");
  const Eigen::Index r = parts[0].rows();
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    check(p.rows() == r, "concat_cols: row mismatch");
    total += p.cols();
  }
  Matrix out(r, total);
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return make_result(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
                     [offsets = std::move(offsets)](Node& self) {
                       for (std::size_t i = 0; i < self.inputs.size(); ++i) {
                         if (!in(self, i).requires_grad) continue;
                         push(self, i, self.grad.middleCols(offsets[i], in(self, i).value.cols()));
                       }
                     });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  check(start >= 0 && count >= 0 && start + count <= a.rows(), "slice_rows: out of range");
  return make_result(a.value().middleRows(start, count), {a}, [start, count](Node& self) {
    Matrix g = Matrix::Zero(in(self, 0).value.rows(), in(self, 0).value.cols());
    g.middleRows(start, count) = self.grad;
    push(self, 0, g);
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  check(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols: out of range");
  return make_result(a.value().middleCols(start, count), {a}, [start, count](Node& self) {
    Matrix g = Matrix::Zero(in(self, 0).value.rows(), in(self, 0).value.cols());
    g.middleCols(start, count) = self.grad;
    push(self, 0, g);
  });
}

Var pad_rows(const Var& a, Eigen::Index rows) {
  check(rows >= a.rows(), "pad_rows: target smaller than input");
  if (rows == a.rows()) return a;
  Matrix out = Matrix::Zero(rows, a.cols());
  out.topRows(a.rows()) = a.value();
  return make_result(std::move(out), {a}, [](Node& self) {
    push(self, 0, self.grad.topRows(in(self, 0).value.rows()));
  });
}

Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  check(rows * cols == a.value().size(), "reshape: size mismatch");
  Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  return make_result(std::move(out), {a}, [](Node& self) {
    const Matrix& src = in(self, 0).value;
    push(self, 0, Eigen::Map<const Matrix>(self.grad.data(), src.rows(), src.cols()));
  });
}

Var gather_rows(const Var& table, std::span<const int> ids) {
  Matrix out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    check(ids[i] >= 0 && ids[i] < table.rows(), "gather_rows: id out of range");
    out.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
  }
  std::vector<int> saved(ids.begin(), ids.end());
  return make_result(std::move(out), {table}, [saved = std::move(saved)](Node& self) {
    Matrix g = Matrix::Zero(in(self, 0).value.rows(), in(self, 0).value.cols());
    for (std::size_t i = 0; i < saved.size(); ++i)
      g.row(saved[i]) += self.grad.row(static_cast<Eigen::Index>(i));
    push(self, 0, g);
  });
}

Var pairwise_add(const Var& a, const Var& b) {
  check(a.cols() == b.cols(), "pairwise_add: column mismatch");
  const Eigen::Index na = a.rows();
  const Eigen::Index nb = b.rows();
  Matrix out(na * nb, a.cols());
  for (Eigen::Index i = 0; i < na; ++i)
    for (Eigen::Index j = 0; j < nb; ++j) out.row(i * nb + j) = a.value().row(i) + b.value().row(j);
  return make_result(std::move(out), {a, b}, [na, nb](Node& self) {
    const Eigen::Index c = self.grad.cols();
    Matrix ga = Matrix::Zero(na, c);
    Matrix gb = Matrix::Zero(nb, c);
    for (Eigen::Index i = 0; i < na; ++i)
      for (Eigen::Index j = 0; j < nb; ++j) {
        ga.row(i) += self.grad.row(i * nb + j);
        gb.row(j) += self.grad.row(i * nb + j);
      }
    push(self, 0, ga);
    push(self, 1, gb);
  });
}

Var mean_rows(const Var& a) {
  check(a.rows() > 0, "mean_rows: empty input");
  const double inv = 1.0 / double(a.rows());
  Matrix out = a.value().colwise().sum() * inv;
  return make_result(std::move(out), {a}, [inv](Node& self) {
    Matrix g = self.grad.replicate(in(self, 0).value.rows(), 1) * inv;
    push(self, 0, g);
  });
}

Var sum_all(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make_result(std::move(out), {a}, [](Node& self) {
    const auto& v = in(self, 0).value;
    push(self, 0, Matrix::Constant(v.rows(), v.cols(), self.grad(0, 0)));
  });
}

Var mean_all(const Var& a) {
  check(a.value().size() > 0, "mean_all: empty input");
  return scale(sum_all(a), 1.0 / double(a.value().size()));
}

Var im2col(const Var& x, int height, int width, int kernel) {
  check(x.rows() == Eigen::Index(height) * width, "im2col: spatial size mismatch");
  check(kernel % 2 == 1, "im2col: kernel must be odd");
  const int channels = static_cast<int>(x.cols());
  const int pad = kernel / 2;
  Matrix out = Matrix::Zero(Eigen::Index(height) * width, Eigen::Index(kernel) * kernel * channels);
  for (int y = 0; y < height; ++y)
    for (int xx = 0; xx < width; ++xx)
      for (int ky = 0; ky < kernel; ++ky)
        for (int kx = 0; kx < kernel; ++kx) {
          const int sy = y + ky - pad;
          const int sx = xx + kx - pad;
          if (sy < 0 || sy >= height || sx < 0 || sx >= width) continue;
          out.row(y * width + xx).segment((ky * kernel + kx) * channels, channels) =
              x.value().row(sy * width + sx);
        }
  return make_result(std::move(out), {x}, [height, width, kernel, channels, pad](Node& self) {
    Matrix g = Matrix::Zero(Eigen::Index(height) * width, channels);
    for (int y = 0; y < height; ++y)
      for (int xx = 0; xx < width; ++xx)
        for (int ky = 0; ky < kernel; ++ky)
          for (int kx = 0; kx < kernel; ++kx) {
            const int sy = y + ky - pad;
            const int sx = xx + kx - pad;
            if (sy < 0 || sy >= height || sx < 0 || sx >= width) continue;
            g.row(sy * width + sx) +=
                self.grad.row(y * width + xx).segment((ky * kernel + kx) * channels, channels);
          }
    push(self, 0, g);
  });
}

Var avg_pool2(const Var& x, int height, int width) {
  check(x.rows() == Eigen::Index(height) * width, "avg_pool2: spatial size mismatch");
  check(height % 2 == 0 && width % 2 == 0, "avg_pool2: odd spatial size");
  const int oh = height / 2;
  const int ow = width / 2;
  Matrix out = Matrix::Zero(Eigen::Index(oh) * ow, x.cols());
  for (int y = 0; y < oh; ++y)
    for (int xx = 0; xx < ow; ++xx) {
      auto row = out.row(y * ow + xx);
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) row += x.value().row((2 * y + dy) * width + 2 * xx + dx);
      row *= 0.25;
    }
  return make_result(std::move(out), {x}, [height, width, oh, ow](Node& self) {
    Matrix g = Matrix::Zero(Eigen::Index(height) * width, self.grad.cols());
    for (int y = 0; y < oh; ++y)
      for (int xx = 0; xx < ow; ++xx)
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx)
            g.row((2 * y + dy) * width + 2 * xx + dx) += 0.25 * self.grad.row(y * ow + xx);
    push(self, 0, g);
  });
}

Var dropout(const Var& a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  const double keep = 1.0 - rate;
  Matrix mask(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i)
    mask.data()[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
  Matrix out = a.value().cwiseProduct(mask);
  return make_result(std::move(out), {a}, [mask = std::move(mask)](Node& self) {
    push(self, 0, self.grad.cwiseProduct(mask));
  });
}

Var cross_entropy(const Var& logits, int target) {
  check(logits.rows() == 1, "cross_entropy: logits must be a row");
  check(target >= 0 && target < logits.cols(), "cross_entropy: target out of range");
  const auto& z = logits.value();
  const double m = z.maxCoeff();
  Matrix p = (z.array() - m).exp().matrix();
  const double s = p.sum();
  p /= s;
  Matrix out(1, 1);
  out(0, 0) = m + std::log(s) - z(0, target);
  return make_result(std::move(out), {logits}, [p = std::move(p), target](Node& self) {
    Matrix g = p;
    g(0, target) -= 1.0;
    push(self, 0, g * self.grad(0, 0));
  });
}

}  // namespace mmie::ag
