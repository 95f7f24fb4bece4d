// Copyright (c) 2026 vitr authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense 64-bit tensor with tape-based reverse-mode differentiation. Covers
// exactly the operations the scoring pipeline and its training loop need:
// rank-1/rank-2 arithmetic, a handful of reductions, and the row-normalised
// cosine / scaled-softmax pair used by the attention stage.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vitr/errors.hpp"

namespace vitr {

using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until first accumulation
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;  // scatter node.grad into parents
  bool backward_done = false;

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

/// Whether ops currently record the tape (thread-local).
bool grad_enabled();

/// Disables tape recording for its scope; forward values are unchanged.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// Shared handle to a tensor node. Values are immutable once a tensor has
/// entered the graph; only leaves may be mutated in place (optimizer steps)
/// and only gradients accumulate afterwards.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double value, bool requires_grad = false);
  static Tensor from_data(const Shape& shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  std::int64_t size() const { return node_->size(); }
  std::int64_t rows() const;
  std::int64_t cols() const;

  double value() const;  // size-1 tensors
  double at(std::int64_t i) const { return node_->data[static_cast<std::size_t>(i)]; }
  double at(std::int64_t r, std::int64_t c) const { return node_->data[static_cast<std::size_t>(r * cols() + c)]; }

  const std::vector<double>& data() const { return node_->data; }
  /// In-place access for leaves (parameter updates, test perturbations).
  std::vector<double>& data_mut() { return node_->data; }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool v);

  /// Accumulated gradient; zeros if this leaf never received one.
  std::vector<double> grad() const;
  void zero_grad();

  std::shared_ptr<detail::Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Reverse-mode pass from a scalar loss. Gradients accumulate additively into
/// every tracked leaf; a second call on the same loss is a contract error.
void backward(const Tensor& loss);

// --- arithmetic ---
Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k]x[k,n] -> [m,n]
Tensor transpose(const Tensor& a);                // rank-2
Tensor add(const Tensor& a, const Tensor& b);     // equal shapes
Tensor subtract(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);     // elementwise
Tensor mul_scalar(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor add_rowvec(const Tensor& x, const Tensor& v);   // x [r,c] + v [c] per row
Tensor mul_rowwise(const Tensor& x, const Tensor& s);  // row i scaled by s[i]

// --- elementwise maps ---
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor square(const Tensor& a);
Tensor relu(const Tensor& a);

// --- structure ---
Tensor concat_rows(const Tensor& a, const Tensor& b);  // vertical
Tensor concat_cols(const Tensor& a, const Tensor& b);  // horizontal
Tensor slice_rows(const Tensor& x, std::int64_t begin, std::int64_t end);
Tensor reshape(const Tensor& x, const Shape& shape);
Tensor as_row(const Tensor& x);   // rank-1 [n] -> [1,n]
Tensor flatten(const Tensor& x);  // any -> rank-1

// --- reductions ---
Tensor sum_all(const Tensor& x);   // -> scalar
Tensor row_sums(const Tensor& x);  // [r,c] -> [r]

// --- similarity / attention ---
/// Rows scaled to unit L2 norm; all-zero rows stay zero.
Tensor normalize_rows(const Tensor& x);
/// cos(a_i, b_j) for all row pairs; zero-norm rows yield 0.
Tensor cosine_matrix(const Tensor& a, const Tensor& b);  // [k,d],[n,d] -> [k,n]
/// Scalar cosine in [-1,1]; zero-norm operand yields 0.
Tensor cosine_similarity(const Tensor& a, const Tensor& b);
/// softmax(gamma * x) over a rank-1 tensor; gamma > 0.
Tensor softmax_scaled(const Tensor& x, double gamma);
/// Column-wise softmax(gamma * x) of a rank-2 tensor.
Tensor softmax_cols(const Tensor& x, double gamma);

}  // namespace vitr
