// Copyright (c) 2026 vitr authors
// SPDX-License-Identifier: Apache-2.0

#include "vitr/layers.hpp"

#include <cmath>

#include "vitr/errors.hpp"

namespace vitr {

namespace {

Tensor uniform_tensor(const Shape& shape, double bound, Rng& rng) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> data(static_cast<std::size_t>(n));
  for (auto& v : data) v = rng.uniform(-bound, bound);
  return Tensor::from_data(shape, std::move(data), /*requires_grad=*/true);
}

}  // namespace

LinearLayer LinearLayer::init(std::int64_t in, std::int64_t out, Rng& rng) {
  if (in <= 0 || out <= 0)
    throw ConfigError("linear layer dimensions must be positive, got in=" + std::to_string(in) +
                      " out=" + std::to_string(out));
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  LinearLayer layer;
  layer.weight = uniform_tensor({out, in}, bound, rng);
  layer.bias = uniform_tensor({out}, bound, rng);
  return layer;
}

LinearLayer LinearLayer::from(Tensor weight, Tensor bias) {
  if (weight.rank() != 2 || bias.rank() != 1 || bias.size() != weight.shape()[0])
    throw DimensionError("linear layer expects weight [out x in] with bias [out], got " +
                         shape_str(weight.shape()) + " and " + shape_str(bias.shape()));
  LinearLayer layer;
  layer.weight = std::move(weight);
  layer.bias = std::move(bias);
  return layer;
}

Tensor linear(const LinearLayer& layer, const Tensor& x) {
  if (x.rank() != 2 || x.cols() != layer.in_features())
    throw DimensionError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                         shape_str(layer.weight.shape()));
  return add_rowvec(matmul(x, transpose(layer.weight)), layer.bias);
}

Conv1x1Layer Conv1x1Layer::init(std::int64_t in_channels, std::int64_t out_channels, Rng& rng) {
  if (in_channels <= 0 || out_channels <= 0)
    throw ConfigError("conv1x1 channel counts must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels));
  Conv1x1Layer layer;
  layer.weight = uniform_tensor({out_channels, in_channels}, bound, rng);
  layer.bias = uniform_tensor({out_channels}, bound, rng);
  return layer;
}

Tensor conv1x1(const Conv1x1Layer& layer, const Tensor& x) {
  if (x.rank() != 2 || x.cols() != layer.in_channels())
    throw DimensionError("conv1x1: input " + shape_str(x.shape()) + " does not match weight " +
                         shape_str(layer.weight.shape()));
  return add_rowvec(matmul(x, transpose(layer.weight)), layer.bias);
}

GruLayer GruLayer::init(std::int64_t in, std::int64_t hidden, Rng& rng) {
  if (in <= 0 || hidden <= 0) throw ConfigError("gru dimensions must be positive");
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(in));
  const double hid_bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  GruLayer layer;
  layer.w_update = uniform_tensor({hidden, in}, in_bound, rng);
  layer.u_update = uniform_tensor({hidden, hidden}, hid_bound, rng);
  layer.b_update = uniform_tensor({hidden}, hid_bound, rng);
  layer.w_reset = uniform_tensor({hidden, in}, in_bound, rng);
  layer.u_reset = uniform_tensor({hidden, hidden}, hid_bound, rng);
  layer.b_reset = uniform_tensor({hidden}, hid_bound, rng);
  layer.w_cand = uniform_tensor({hidden, in}, in_bound, rng);
  layer.u_cand = uniform_tensor({hidden, hidden}, hid_bound, rng);
  layer.b_cand = uniform_tensor({hidden}, hid_bound, rng);
  return layer;
}

namespace {

Tensor gru_step(const GruLayer& layer, const Tensor& x_row, const Tensor& h_row) {
  const Tensor zs = sigmoid(add_rowvec(
      add(matmul(x_row, transpose(layer.w_update)), matmul(h_row, transpose(layer.u_update))),
      layer.b_update));
  const Tensor rs = sigmoid(add_rowvec(
      add(matmul(x_row, transpose(layer.w_reset)), matmul(h_row, transpose(layer.u_reset))),
      layer.b_reset));
  const Tensor cand = tanh(add_rowvec(
      add(matmul(x_row, transpose(layer.w_cand)), matmul(mul(rs, h_row), transpose(layer.u_cand))),
      layer.b_cand));
  // h' = (1 - z) . h + z . c
  return add(subtract(h_row, mul(zs, h_row)), mul(zs, cand));
}

}  // namespace

std::vector<Tensor> gru_forward(const GruLayer& layer, const std::vector<Tensor>& sequence) {
  if (sequence.empty()) throw std::invalid_argument("gru_forward: sequence must be nonempty");
  std::vector<Tensor> hidden;
  hidden.reserve(sequence.size());
  Tensor h = Tensor::zeros({1, layer.hidden_size()});
  for (const Tensor& x : sequence) {
    if (x.rank() != 1 || x.size() != layer.input_size())
      throw DimensionError("gru_forward: element " + shape_str(x.shape()) +
                           " does not match input size " + std::to_string(layer.input_size()));
    h = gru_step(layer, as_row(x), h);
    hidden.push_back(flatten(h));
  }
  return hidden;
}

std::vector<Tensor> gru_forward_rows(const GruLayer& layer, const Tensor& sequence) {
  if (sequence.rank() != 2)
    throw DimensionError("gru_forward_rows expects a rank-2 sequence, got " +
                         shape_str(sequence.shape()));
  std::vector<Tensor> elems;
  elems.reserve(static_cast<std::size_t>(sequence.rows()));
  for (std::int64_t t = 0; t < sequence.rows(); ++t)
    elems.push_back(flatten(slice_rows(sequence, t, t + 1)));
  return gru_forward(layer, elems);
}

}  // namespace vitr
