// Copyright (c) 2026 vitr authors
// SPDX-License-Identifier: Apache-2.0

#include "vitr/fusion.hpp"

#include "vitr/errors.hpp"

namespace vitr {

FusionStage FusionStage::init(std::int64_t d1, std::int64_t d3, std::int64_t d4, Rng& rng) {
  FusionStage stage;
  stage.join_global = LinearLayer::init(d1, d4, rng);
  stage.join_word = LinearLayer::init(d3, d4, rng);
  stage.edge_query = LinearLayer::init(d4, d4, rng);
  stage.edge_key = LinearLayer::init(d4, d4, rng);
  stage.fuse_map = LinearLayer::init(d4, d4, rng);
  stage.seq = GruLayer::init(d4, d4, rng);
  stage.score_head = LinearLayer::init(d4, 1, rng);
  return stage;
}

Tensor join(const Tensor& u_glob, const Tensor& v_glob, const Tensor& words,
            const Tensor& aligned_regions, const FusionStage& stage) {
  if (u_glob.rank() != 1 || v_glob.rank() != 1 || u_glob.size() != v_glob.size())
    throw DimensionError("join: global vectors disagree, " + shape_str(u_glob.shape()) + " vs " +
                         shape_str(v_glob.shape()));
  const Tensor global_join =
      linear(stage.join_global, as_row(square(subtract(u_glob, v_glob))));  // [1, d4]
  return concat_rows(global_join, join_words_only(words, aligned_regions, stage));
}

Tensor join_words_only(const Tensor& words, const Tensor& aligned_regions,
                       const FusionStage& stage) {
  if (words.rank() != 2 || aligned_regions.rank() != 2 || words.shape() != aligned_regions.shape())
    throw DimensionError("join: words " + shape_str(words.shape()) + " and aligned regions " +
                         shape_str(aligned_regions.shape()) + " must match");
  return linear(stage.join_word, square(subtract(words, aligned_regions)));  // [n, d4]
}

Tensor graph_fuse(const Tensor& joined, const FusionStage& stage, std::int64_t rounds,
                  FuseVariant variant) {
  if (joined.rank() != 2 || joined.cols() != stage.fuse_map.in_features())
    throw DimensionError("graph_fuse: input " + shape_str(joined.shape()) +
                         " does not match fusion dimension " +
                         std::to_string(stage.fuse_map.in_features()));
  if (rounds < 1) throw ConfigError("graph_fuse: recursion count must be >= 1");

  Tensor current = joined;
  for (std::int64_t r = 0; r < rounds; ++r) {
    const Tensor edges = matmul(linear(stage.edge_query, current),
                                transpose(linear(stage.edge_key, current)));  // [(n+1),(n+1)]
    const Tensor gates = sigmoid(edges);
    Tensor mixed;
    if (variant == FuseVariant::literal) {
      // sum_l W(g_{jl} z_j) = W((sum_l g_{jl}) z_j) + (n+1) b; the node count
      // scales the bias because the map applies once per edge.
      mixed = mul_rowwise(current, row_sums(gates));
    } else {
      mixed = matmul(gates, current);
    }
    const std::int64_t node_count = current.rows();
    const Tensor mapped = matmul(mixed, transpose(stage.fuse_map.weight));
    current = add_rowvec(mapped, flatten(mul_scalar(as_row(stage.fuse_map.bias),
                                                    static_cast<double>(node_count))));
  }
  return current;
}

Tensor score_sequence(const Tensor& fused, const FusionStage& stage, SeqState state) {
  if (fused.rank() != 2 || fused.rows() < 1)
    throw DimensionError("score_sequence expects a nonempty rank-2 sequence, got " +
                         shape_str(fused.shape()));
  const std::vector<Tensor> hidden = gru_forward_rows(stage.seq, fused);
  const Tensor& combined = state == SeqState::first ? hidden.front() : hidden.back();
  return flatten(sigmoid(linear(stage.score_head, as_row(combined))));
}

}  // namespace vitr
