// Copyright (c) 2026 vitr authors
// SPDX-License-Identifier: Apache-2.0
//
// Relational reasoning over projected region features: a bilinear region
// relation graph, a kernel-1 convolution over stacked relation channels, and
// a sigmoid gate, recursed a fixed number of rounds; followed by word-aligned
// attention pooling.

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "vitr/layers.hpp"
#include "vitr/tensor.hpp"

namespace vitr {

/// One round of relation extraction. Rounds usually share a single set of
/// weights; per-round weights exist for ablation.
struct ReasoningRound {
  LinearLayer edge_query;   // [d3 -> d3], row side of the relation product
  LinearLayer edge_key;     // [d3 -> d3], column side
  Conv1x1Layer pair_conv;   // [2k -> k] channels, kernel size 1
  LinearLayer inner_map;    // [d3 -> 1]
  LinearLayer merge_map;    // [(k+1) -> 1]

  static ReasoningRound init(std::int64_t k, std::int64_t d3, Rng& rng);
};

/// Column-normalised attention of regions over words plus its per-region
/// averages; detached from the graph, used for heat-map export.
struct AttentionTrace {
  Tensor weights;                    // [k, n], each column sums to 1
  std::vector<double> region_means;  // mean weight per region
};

/// Bilinear relation matrix: R[i,l] = edge_query(v_i) . edge_key(v_l).
Tensor relation_matrix(const Tensor& regions, const ReasoningRound& round);  // [k,d3] -> [k,k]

/// tanh(conv over the 2k channels [row relations, column relations] at each
/// of the k region positions). Row i holds position i's output channels.
Tensor pairwise_relations(const Tensor& relation, const ReasoningRound& round);  // [k,k] -> [k,k]

/// Per-region scalar tanh(inner_map(v_i)), assembled into a vector.
Tensor inner_relations(const Tensor& regions, const ReasoningRound& round);  // [k,d3] -> [k]

/// Merges pairwise and inner relations into a per-region gate in (0,1) and
/// scales each region row by it.
Tensor merge_and_gate(const Tensor& regions, const Tensor& pairwise, const Tensor& inner,
                      const ReasoningRound& round);  // -> [k,d3]

/// Runs the four-step relation pipeline `rounds` times, feeding each output
/// back as the next input. rounds.size() is 1 (shared weights) or `count`.
Tensor reason(const Tensor& regions, const std::vector<ReasoningRound>& rounds,
              std::int64_t count);

/// Aligns gated regions with words: thresholded row-normalised cosines,
/// column softmax with inverse temperature gamma, then weight-averaged
/// regions per word.
std::pair<Tensor, AttentionTrace> attend(const Tensor& gated_regions, const Tensor& words,
                                         double gamma);  // [k,d3],[n,d3] -> [n,d3]

}  // namespace vitr
