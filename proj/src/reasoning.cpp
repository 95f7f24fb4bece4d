// Copyright (c) 2026 vitr authors
// SPDX-License-Identifier: Apache-2.0

#include "vitr/reasoning.hpp"

#include "vitr/errors.hpp"

namespace vitr {

ReasoningRound ReasoningRound::init(std::int64_t k, std::int64_t d3, Rng& rng) {
  ReasoningRound round;
  round.edge_query = LinearLayer::init(d3, d3, rng);
  round.edge_key = LinearLayer::init(d3, d3, rng);
  round.pair_conv = Conv1x1Layer::init(2 * k, k, rng);
  round.inner_map = LinearLayer::init(d3, 1, rng);
  round.merge_map = LinearLayer::init(k + 1, 1, rng);
  return round;
}

Tensor relation_matrix(const Tensor& regions, const ReasoningRound& round) {
  return matmul(linear(round.edge_query, regions), transpose(linear(round.edge_key, regions)));
}

Tensor pairwise_relations(const Tensor& relation, const ReasoningRound& round) {
  if (relation.rank() != 2 || relation.rows() != relation.cols())
    throw DimensionError("pairwise_relations expects a square relation matrix, got " +
                         shape_str(relation.shape()));
  // Channel stack at position i: first the relations from i (row i), then the
  // relations towards i (column i).
  const Tensor stacked = concat_cols(relation, transpose(relation));  // [k, 2k]
  return tanh(conv1x1(round.pair_conv, stacked));
}

Tensor inner_relations(const Tensor& regions, const ReasoningRound& round) {
  return flatten(tanh(linear(round.inner_map, regions)));  // [k]
}

Tensor merge_and_gate(const Tensor& regions, const Tensor& pairwise, const Tensor& inner,
                      const ReasoningRound& round) {
  const std::int64_t k = regions.rows();
  if (pairwise.rank() != 2 || pairwise.rows() != k || pairwise.cols() != k)
    throw DimensionError("merge_and_gate: pairwise relations are " + shape_str(pairwise.shape()) +
                         ", expected [" + std::to_string(k) + " x " + std::to_string(k) + "]");
  if (inner.rank() != 1 || inner.size() != k)
    throw DimensionError("merge_and_gate: inner relations are " + shape_str(inner.shape()) +
                         ", expected [" + std::to_string(k) + "]");
  const Tensor merged = concat_cols(pairwise, reshape(inner, {k, 1}));       // [k, k+1]
  const Tensor gate_logit = tanh(linear(round.merge_map, merged));           // [k, 1]
  const Tensor gate = flatten(sigmoid(gate_logit));                          // [k], entries in (0,1)
  return mul_rowwise(regions, gate);
}

Tensor reason(const Tensor& regions, const std::vector<ReasoningRound>& rounds,
              std::int64_t count) {
  if (count < 1) throw ConfigError("reason: recursion count must be >= 1");
  if (rounds.empty() ||
      (rounds.size() != 1 && rounds.size() != static_cast<std::size_t>(count)))
    throw ConfigError("reason: expected 1 shared round or one per recursion, got " +
                      std::to_string(rounds.size()));
  Tensor current = regions;
  for (std::int64_t i = 0; i < count; ++i) {
    const ReasoningRound& round = rounds[rounds.size() == 1 ? 0 : static_cast<std::size_t>(i)];
    const Tensor relation = relation_matrix(current, round);
    const Tensor pairwise = pairwise_relations(relation, round);
    const Tensor inner = inner_relations(current, round);
    current = merge_and_gate(current, pairwise, inner, round);
  }
  return current;
}

std::pair<Tensor, AttentionTrace> attend(const Tensor& gated_regions, const Tensor& words,
                                         double gamma) {
  if (gated_regions.rank() != 2 || words.rank() != 2 || gated_regions.cols() != words.cols())
    throw DimensionError("attend: regions " + shape_str(gated_regions.shape()) +
                         " and words " + shape_str(words.shape()) + " must share the feature axis");
  const std::int64_t k = gated_regions.rows();
  const std::int64_t n = words.rows();

  // Thresholded cosine per (region, word), then each region's row rescaled to
  // unit norm; regions aligned with no word keep an all-zero row.
  const Tensor aligned = normalize_rows(relu(cosine_matrix(gated_regions, words)));  // [k, n]
  const Tensor weights = softmax_cols(aligned, gamma);                               // columns sum to 1
  const Tensor pooled = matmul(transpose(weights), gated_regions);                   // [n, d3]

  AttentionTrace trace;
  {
    NoGradGuard no_grad;
    trace.weights = Tensor::from_data({k, n}, weights.data());
    trace.region_means.resize(static_cast<std::size_t>(k), 0.0);
    for (std::int64_t i = 0; i < k; ++i) {
      double acc = 0.0;
      for (std::int64_t j = 0; j < n; ++j) acc += weights.at(i, j);
      trace.region_means[static_cast<std::size_t>(i)] = acc / static_cast<double>(n);
    }
  }
  return {pooled, std::move(trace)};
}

}  // namespace vitr
