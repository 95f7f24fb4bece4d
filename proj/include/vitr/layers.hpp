// Copyright (c) 2026 vitr authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "vitr/rng.hpp"
#include "vitr/tensor.hpp"

namespace vitr {

/// Fully connected map x -> W x + b applied to each row of a rank-2 input.
struct LinearLayer {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]

  /// Weights and bias drawn uniformly from +-1/sqrt(in).
  static LinearLayer init(std::int64_t in, std::int64_t out, Rng& rng);
  static LinearLayer from(Tensor weight, Tensor bias);

  std::int64_t in_features() const { return weight.shape()[1]; }
  std::int64_t out_features() const { return weight.shape()[0]; }
};

Tensor linear(const LinearLayer& layer, const Tensor& x);  // [r,in] -> [r,out]

/// Kernel-1 1D convolution: a per-position linear map over channels.
/// Positions are rows, channels are columns.
struct Conv1x1Layer {
  Tensor weight;  // [out_channels, in_channels]
  Tensor bias;    // [out_channels]

  static Conv1x1Layer init(std::int64_t in_channels, std::int64_t out_channels, Rng& rng);

  std::int64_t in_channels() const { return weight.shape()[1]; }
  std::int64_t out_channels() const { return weight.shape()[0]; }
};

Tensor conv1x1(const Conv1x1Layer& layer, const Tensor& x);  // [pos,in_ch] -> [pos,out_ch]

/// Gated recurrent unit with update (z), reset (r), and candidate gates:
///   z_t = sig(Wz x + Uz h + bz)
///   r_t = sig(Wr x + Ur h + br)
///   c_t = tanh(Wc x + Uc (r_t . h) + bc)
///   h_t = (1 - z_t) . h + z_t . c_t
struct GruLayer {
  Tensor w_update, u_update, b_update;
  Tensor w_reset, u_reset, b_reset;
  Tensor w_cand, u_cand, b_cand;

  static GruLayer init(std::int64_t in, std::int64_t hidden, Rng& rng);

  std::int64_t input_size() const { return w_update.shape()[1]; }
  std::int64_t hidden_size() const { return w_update.shape()[0]; }
};

/// Runs the GRU over a sequence of rank-1 inputs from h_0 = 0 and returns one
/// hidden state per element.
std::vector<Tensor> gru_forward(const GruLayer& layer, const std::vector<Tensor>& sequence);

/// Same, with the rows of a rank-2 tensor as the sequence.
std::vector<Tensor> gru_forward_rows(const GruLayer& layer, const Tensor& sequence);

}  // namespace vitr
