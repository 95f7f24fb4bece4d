// Copyright (c) 2026 vitr authors
// SPDX-License-Identifier: Apache-2.0

#include "vitr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace vitr {

namespace {

thread_local bool g_grad_enabled = true;

std::int64_t shape_size(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void check_positive_extents(const Shape& shape) {
  for (auto d : shape) {
    if (d <= 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
}

using NodePtr = std::shared_ptr<detail::Node>;

NodePtr new_node(Shape shape, std::vector<double> data, bool requires_grad) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return node;
}

/// Builds an op result; records parents and the backprop closure only when the
/// tape is live and some input is tracked.
Tensor make_op(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
               std::function<void(detail::Node&)> backprop) {
  bool track = grad_enabled();
  if (track) {
    track = false;
    for (const auto& t : inputs) track = track || t.requires_grad();
  }
  auto node = new_node(std::move(shape), std::move(data), track);
  if (track) {
    node->parents.reserve(inputs.size());
    for (auto& t : inputs) node->parents.push_back(t.node());
    node->backprop = std::move(backprop);
  }
  return Tensor(std::move(node));
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2)
    throw DimensionError(std::string(op) + " expects a rank-2 tensor, got " + shape_str(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch between " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
}

}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  check_positive_extents(shape);
  return Tensor(new_node(shape, std::vector<double>(static_cast<std::size_t>(shape_size(shape)), 0.0),
                         requires_grad));
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
  check_positive_extents(shape);
  return Tensor(new_node(shape, std::vector<double>(static_cast<std::size_t>(shape_size(shape)), value),
                         requires_grad));
}

Tensor Tensor::from_data(const Shape& shape, std::vector<double> data, bool requires_grad) {
  check_positive_extents(shape);
  if (shape_size(shape) != static_cast<std::int64_t>(data.size()))
    throw DimensionError("data length " + std::to_string(data.size()) + " does not fill shape " +
                         shape_str(shape));
  return Tensor(new_node(shape, std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(new_node(Shape{1}, std::vector<double>{value}, requires_grad));
}

std::int64_t Tensor::rows() const {
  require_rank2(*this, "rows()");
  return node_->shape[0];
}

std::int64_t Tensor::cols() const {
  require_rank2(*this, "cols()");
  return node_->shape[1];
}

double Tensor::value() const {
  if (size() != 1)
    throw DimensionError("value() expects a size-1 tensor, got " + shape_str(shape()));
  return node_->data[0];
}

void Tensor::set_requires_grad(bool v) {
  if (node_->backprop)
    throw std::logic_error("requires_grad may only be toggled on leaf tensors");
  node_->requires_grad = v;
}

std::vector<double> Tensor::grad() const {
  if (!node_->grad.empty()) return node_->grad;
  return std::vector<double>(node_->data.size(), 0.0);
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw std::invalid_argument("backward requires a scalar loss, got " +
                                (loss.defined() ? shape_str(loss.shape()) : std::string("empty")));
  auto root = loss.node();
  if (!root->requires_grad)
    throw std::invalid_argument("backward requires a loss produced by tracked operations");
  if (root->backward_done)
    throw std::logic_error("backward already ran for this loss; rebuild the graph before calling again");
  root->backward_done = true;

  // Depth-first post-order; reversed it is a valid topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backprop && !node->grad.empty()) node->backprop(*node);
  }
  // The tape is single-use; drop it so intermediate buffers free eagerly.
  for (detail::Node* node : order) {
    if (node != root.get() && node->backprop) {
      node->backprop = nullptr;
      node->parents.clear();
    }
  }
  root->backprop = nullptr;
  root->parents.clear();
}

// ---------------------------------------------------------------------------
// arithmetic

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions disagree between " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
  const std::int64_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(static_cast<std::size_t>(m * n), 0.0);
  const auto& ad = a.data();
  const auto& bd = b.data();
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t p = 0; p < k; ++p) {
      const double av = ad[static_cast<std::size_t>(i * k + p)];
      if (av == 0.0) continue;
      const std::size_t arow = static_cast<std::size_t>(i * n);
      const std::size_t brow = static_cast<std::size_t>(p * n);
      for (std::int64_t j = 0; j < n; ++j) out[arow + j] += av * bd[brow + j];
    }
  return make_op({m, n}, std::move(out), {a, b}, [m, k, n](detail::Node& node) {
    auto& pa = *node.parents[0];
    auto& pb = *node.parents[1];
    const auto& g = node.grad;
    if (pa.requires_grad) {
      pa.ensure_grad();  // dA = G * B^T
      for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::int64_t j = 0; j < n; ++j)
            acc += g[static_cast<std::size_t>(i * n + j)] * pb.data[static_cast<std::size_t>(p * n + j)];
          pa.grad[static_cast<std::size_t>(i * k + p)] += acc;
        }
    }
    if (pb.requires_grad) {
      pb.ensure_grad();  // dB = A^T * G
      for (std::int64_t p = 0; p < k; ++p)
        for (std::int64_t j = 0; j < n; ++j) {
          double acc = 0.0;
          for (std::int64_t i = 0; i < m; ++i)
            acc += pa.data[static_cast<std::size_t>(i * k + p)] * g[static_cast<std::size_t>(i * n + j)];
          pb.grad[static_cast<std::size_t>(p * n + j)] += acc;
        }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const std::int64_t r = a.rows(), c = a.cols();
  std::vector<double> out(static_cast<std::size_t>(r * c));
  const auto& ad = a.data();
  for (std::int64_t i = 0; i < r; ++i)
    for (std::int64_t j = 0; j < c; ++j)
      out[static_cast<std::size_t>(j * r + i)] = ad[static_cast<std::size_t>(i * c + j)];
  return make_op({c, r}, std::move(out), {a}, [r, c](detail::Node& node) {
    auto& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::int64_t i = 0; i < r; ++i)
      for (std::int64_t j = 0; j < c; ++j)
        p.grad[static_cast<std::size_t>(i * c + j)] += node.grad[static_cast<std::size_t>(j * r + i)];
  });
}

namespace {

Tensor binary_pointwise(const Tensor& a, const Tensor& b, const char* name,
                        double (*fwd)(double, double),
                        void (*bwd)(detail::Node&, const double*, const double*)) {
  require_same_shape(a, b, name);
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.data()[i], b.data()[i]);
  return make_op(a.shape(), std::move(out), {a, b}, [bwd](detail::Node& node) {
    bwd(node, node.parents[0]->data.data(), node.parents[1]->data.data());
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_pointwise(
      a, b, "add", [](double x, double y) { return x + y; },
      [](detail::Node& node, const double*, const double*) {
        for (int side = 0; side < 2; ++side) {
          auto& p = *node.parents[side];
          if (!p.requires_grad) continue;
          p.ensure_grad();
          for (std::size_t i = 0; i < node.grad.size(); ++i) p.grad[i] += node.grad[i];
        }
      });
}

Tensor subtract(const Tensor& a, const Tensor& b) {
  return binary_pointwise(
      a, b, "subtract", [](double x, double y) { return x - y; },
      [](detail::Node& node, const double*, const double*) {
        auto& pa = *node.parents[0];
        auto& pb = *node.parents[1];
        if (pa.requires_grad) {
          pa.ensure_grad();
          for (std::size_t i = 0; i < node.grad.size(); ++i) pa.grad[i] += node.grad[i];
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          for (std::size_t i = 0; i < node.grad.size(); ++i) pb.grad[i] -= node.grad[i];
        }
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_pointwise(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](detail::Node& node, const double* ad, const double* bd) {
        auto& pa = *node.parents[0];
        auto& pb = *node.parents[1];
        if (pa.requires_grad) {
          pa.ensure_grad();
          for (std::size_t i = 0; i < node.grad.size(); ++i) pa.grad[i] += node.grad[i] * bd[i];
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          for (std::size_t i = 0; i < node.grad.size(); ++i) pb.grad[i] += node.grad[i] * ad[i];
        }
      });
}

Tensor mul_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
  return make_op(a.shape(), std::move(out), {a}, [c](detail::Node& node) {
    auto& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < node.grad.size(); ++i) p.grad[i] += node.grad[i] * c;
  });
}

Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + c;
  return make_op(a.shape(), std::move(out), {a}, [](detail::Node& node) {
    auto& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < node.grad.size(); ++i) p.grad[i] += node.grad[i];
  });
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
  require_rank2(x, "add_rowvec");
  if (v.rank() != 1 || v.size() != x.cols())
    throw DimensionError("add_rowvec: vector " + shape_str(v.shape()) + " does not match columns of " +
                         shape_str(x.shape()));
  const std::int64_t r = x.rows(), c = x.cols();
  std::vector<double> out(x.data().size());
  for (std::int64_t i = 0; i < r; ++i)
    for (std::int64_t j = 0; j < c; ++j)
      out[static_cast<std::size_t>(i * c + j)] =
          x.data()[static_cast<std::size_t>(i * c + j)] + v.data()[static_cast<std::size_t>(j)];
  return make_op({r, c}, std::move(out), {x, v}, [r, c](detail::Node& node) {
    auto& px = *node.parents[0];
    auto& pv = *node.parents[1];
    if (px.requires_grad) {
      px.ensure_grad();
      for (std::size_t i = 0; i < node.grad.size(); ++i) px.grad[i] += node.grad[i];
    }
    if (pv.requires_grad) {
      pv.ensure_grad();
      for (std::int64_t i = 0; i < r; ++i)
        for (std::int64_t j = 0; j < c; ++j)
          pv.grad[static_cast<std::size_t>(j)] += node.grad[static_cast<std::size_t>(i * c + j)];
    }
  });
}

Tensor mul_rowwise(const Tensor& x, const Tensor& s) {
  require_rank2(x, "mul_rowwise");
  if (s.rank() != 1 || s.size() != x.rows())
    throw DimensionError("mul_rowwise: scale " + shape_str(s.shape()) + " does not match rows of " +
                         shape_str(x.shape()));
  const std::int64_t r = x.rows(), c = x.cols();
  std::vector<double> out(x.data().size());
  for (std::int64_t i = 0; i < r; ++i) {
    const double si = s.data()[static_cast<std::size_t>(i)];
    for (std::int64_t j = 0; j < c; ++j)
      out[static_cast<std::size_t>(i * c + j)] = x.data()[static_cast<std::size_t>(i * c + j)] * si;
  }
  return make_op({r, c}, std::move(out), {x, s}, [r, c](detail::Node& node) {
    auto& px = *node.parents[0];
    auto& ps = *node.parents[1];
    if (px.requires_grad) {
      px.ensure_grad();
      for (std::int64_t i = 0; i < r; ++i) {
        const double si = ps.data[static_cast<std::size_t>(i)];
        for (std::int64_t j = 0; j < c; ++j)
          px.grad[static_cast<std::size_t>(i * c + j)] += node.grad[static_cast<std::size_t>(i * c + j)] * si;
      }
    }
    if (ps.requires_grad) {
      ps.ensure_grad();
      for (std::int64_t i = 0; i < r; ++i) {
        double acc = 0.0;
        for (std::int64_t j = 0; j < c; ++j)
          acc += px.data[static_cast<std::size_t>(i * c + j)] * node.grad[static_cast<std::size_t>(i * c + j)];
        ps.grad[static_cast<std::size_t>(i)] += acc;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// elementwise maps

namespace {

/// dy/dx expressed through (x, y) so saturating maps reuse their output.
Tensor unary_pointwise(const Tensor& a, double (*fwd)(double), double (*dfdx)(double, double)) {
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.data()[i]);
  return make_op(a.shape(), std::move(out), {a}, [dfdx](detail::Node& node) {
    auto& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < node.grad.size(); ++i)
      p.grad[i] += node.grad[i] * dfdx(p.data[i], node.data[i]);
  });
}

}  // namespace

Tensor tanh(const Tensor& a) {
  return unary_pointwise(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_pointwise(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor square(const Tensor& a) {
  return unary_pointwise(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor relu(const Tensor& a) {
  return unary_pointwise(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// structure

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  require_rank2(a, "concat_rows");
  require_rank2(b, "concat_rows");
  if (a.cols() != b.cols())
    throw DimensionError("concat_rows: column counts disagree between " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
  const std::int64_t ra = a.rows(), rb = b.rows(), c = a.cols();
  std::vector<double> out;
  out.reserve(a.data().size() + b.data().size());
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  return make_op({ra + rb, c}, std::move(out), {a, b}, [ra, c](detail::Node& node) {
    auto& pa = *node.parents[0];
    auto& pb = *node.parents[1];
    const std::size_t split = static_cast<std::size_t>(ra * c);
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < split; ++i) pa.grad[i] += node.grad[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = split; i < node.grad.size(); ++i) pb.grad[i - split] += node.grad[i];
    }
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_rank2(a, "concat_cols");
  require_rank2(b, "concat_cols");
  if (a.rows() != b.rows())
    throw DimensionError("concat_cols: row counts disagree between " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
  const std::int64_t r = a.rows(), ca = a.cols(), cb = b.cols();
  std::vector<double> out(static_cast<std::size_t>(r * (ca + cb)));
  for (std::int64_t i = 0; i < r; ++i) {
    for (std::int64_t j = 0; j < ca; ++j)
      out[static_cast<std::size_t>(i * (ca + cb) + j)] = a.data()[static_cast<std::size_t>(i * ca + j)];
    for (std::int64_t j = 0; j < cb; ++j)
      out[static_cast<std::size_t>(i * (ca + cb) + ca + j)] = b.data()[static_cast<std::size_t>(i * cb + j)];
  }
  return make_op({r, ca + cb}, std::move(out), {a, b}, [r, ca, cb](detail::Node& node) {
    auto& pa = *node.parents[0];
    auto& pb = *node.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::int64_t i = 0; i < r; ++i)
        for (std::int64_t j = 0; j < ca; ++j)
          pa.grad[static_cast<std::size_t>(i * ca + j)] +=
              node.grad[static_cast<std::size_t>(i * (ca + cb) + j)];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::int64_t i = 0; i < r; ++i)
        for (std::int64_t j = 0; j < cb; ++j)
          pb.grad[static_cast<std::size_t>(i * cb + j)] +=
              node.grad[static_cast<std::size_t>(i * (ca + cb) + ca + j)];
    }
  });
}

Tensor slice_rows(const Tensor& x, std::int64_t begin, std::int64_t end) {
  require_rank2(x, "slice_rows");
  if (begin < 0 || end > x.rows() || begin >= end)
    throw DimensionError("slice_rows: invalid range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") for " + shape_str(x.shape()));
  const std::int64_t c = x.cols();
  std::vector<double> out(x.data().begin() + static_cast<std::ptrdiff_t>(begin * c),
                          x.data().begin() + static_cast<std::ptrdiff_t>(end * c));
  return make_op({end - begin, c}, std::move(out), {x}, [begin, c](detail::Node& node) {
    auto& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const std::size_t off = static_cast<std::size_t>(begin * c);
    for (std::size_t i = 0; i < node.grad.size(); ++i) p.grad[off + i] += node.grad[i];
  });
}

Tensor reshape(const Tensor& x, const Shape& shape) {
  check_positive_extents(shape);
  if (shape_size(shape) != x.size())
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  return make_op(shape, x.data(), {x}, [](detail::Node& node) {
    auto& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < node.grad.size(); ++i) p.grad[i] += node.grad[i];
  });
}

Tensor as_row(const Tensor& x) { return reshape(x, {1, x.size()}); }

Tensor flatten(const Tensor& x) { return reshape(x, {x.size()}); }

// ---------------------------------------------------------------------------
// reductions

Tensor sum_all(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return make_op({1}, {acc}, {x}, [](detail::Node& node) {
    auto& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += node.grad[0];
  });
}

Tensor row_sums(const Tensor& x) {
  require_rank2(x, "row_sums");
  const std::int64_t r = x.rows(), c = x.cols();
  std::vector<double> out(static_cast<std::size_t>(r), 0.0);
  for (std::int64_t i = 0; i < r; ++i)
    for (std::int64_t j = 0; j < c; ++j)
      out[static_cast<std::size_t>(i)] += x.data()[static_cast<std::size_t>(i * c + j)];
  return make_op({r}, std::move(out), {x}, [r, c](detail::Node& node) {
    auto& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::int64_t i = 0; i < r; ++i)
      for (std::int64_t j = 0; j < c; ++j)
        p.grad[static_cast<std::size_t>(i * c + j)] += node.grad[static_cast<std::size_t>(i)];
  });
}

// ---------------------------------------------------------------------------
// similarity / attention

Tensor normalize_rows(const Tensor& x) {
  require_rank2(x, "normalize_rows");
  const std::int64_t r = x.rows(), c = x.cols();
  std::vector<double> out(x.data().size());
  std::vector<double> norms(static_cast<std::size_t>(r), 0.0);
  for (std::int64_t i = 0; i < r; ++i) {
    double sq = 0.0;
    for (std::int64_t j = 0; j < c; ++j) {
      const double v = x.data()[static_cast<std::size_t>(i * c + j)];
      sq += v * v;
    }
    const double norm = std::sqrt(sq);
    norms[static_cast<std::size_t>(i)] = norm;
    const double inv = norm > 0.0 ? 1.0 / norm : 0.0;
    for (std::int64_t j = 0; j < c; ++j)
      out[static_cast<std::size_t>(i * c + j)] = x.data()[static_cast<std::size_t>(i * c + j)] * inv;
  }
  return make_op({r, c}, std::move(out), {x}, [r, c, norms](detail::Node& node) {
    auto& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::int64_t i = 0; i < r; ++i) {
      const double norm = norms[static_cast<std::size_t>(i)];
      if (norm == 0.0) continue;  // zero rows stay zero with zero gradient
      double dot = 0.0;
      for (std::int64_t j = 0; j < c; ++j)
        dot += node.data[static_cast<std::size_t>(i * c + j)] * node.grad[static_cast<std::size_t>(i * c + j)];
      for (std::int64_t j = 0; j < c; ++j) {
        const std::size_t idx = static_cast<std::size_t>(i * c + j);
        p.grad[idx] += (node.grad[idx] - dot * node.data[idx]) / norm;
      }
    }
  });
}

Tensor cosine_matrix(const Tensor& a, const Tensor& b) {
  require_rank2(a, "cosine_matrix");
  require_rank2(b, "cosine_matrix");
  if (a.cols() != b.cols())
    throw DimensionError("cosine_matrix: feature dimensions disagree between " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
  return matmul(normalize_rows(a), transpose(normalize_rows(b)));
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
  if (a.rank() != 1 || b.rank() != 1)
    throw DimensionError("cosine_similarity expects rank-1 tensors, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
  if (a.size() != b.size())
    throw DimensionError("cosine_similarity: lengths disagree between " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
  return flatten(cosine_matrix(as_row(a), as_row(b)));
}

Tensor softmax_scaled(const Tensor& x, double gamma) {
  if (x.rank() != 1)
    throw DimensionError("softmax_scaled expects a rank-1 tensor, got " + shape_str(x.shape()));
  if (!(gamma > 0.0))
    throw ConfigError("softmax_scaled: inverse temperature must be positive, got " +
                      std::to_string(gamma));
  return flatten(softmax_cols(reshape(x, {x.size(), 1}), gamma));
}

Tensor softmax_cols(const Tensor& x, double gamma) {
  require_rank2(x, "softmax_cols");
  if (!(gamma > 0.0))
    throw ConfigError("softmax_cols: inverse temperature must be positive, got " +
                      std::to_string(gamma));
  const std::int64_t r = x.rows(), c = x.cols();
  std::vector<double> out(x.data().size());
  for (std::int64_t j = 0; j < c; ++j) {
    double mx = -HUGE_VAL;
    for (std::int64_t i = 0; i < r; ++i)
      mx = std::max(mx, x.data()[static_cast<std::size_t>(i * c + j)]);
    double denom = 0.0;
    for (std::int64_t i = 0; i < r; ++i) {
      const double e = std::exp(gamma * (x.data()[static_cast<std::size_t>(i * c + j)] - mx));
      out[static_cast<std::size_t>(i * c + j)] = e;
      denom += e;
    }
    for (std::int64_t i = 0; i < r; ++i) out[static_cast<std::size_t>(i * c + j)] /= denom;
  }
  return make_op({r, c}, std::move(out), {x}, [r, c, gamma](detail::Node& node) {
    auto& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::int64_t j = 0; j < c; ++j) {
      double dot = 0.0;
      for (std::int64_t i = 0; i < r; ++i) {
        const std::size_t idx = static_cast<std::size_t>(i * c + j);
        dot += node.data[idx] * node.grad[idx];
      }
      for (std::int64_t i = 0; i < r; ++i) {
        const std::size_t idx = static_cast<std::size_t>(i * c + j);
        p.grad[idx] += gamma * node.data[idx] * (node.grad[idx] - dot);
      }
    }
  });
}

}  // namespace vitr
