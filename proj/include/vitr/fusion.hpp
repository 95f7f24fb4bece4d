// Copyright (c) 2026 vitr authors
// SPDX-License-Identifier: Apache-2.0
//
// Fusion of the global representation pair with the word-aligned local pairs:
// squared-difference joins, an edge-gated graph recursed g2 times, and a GRU
// sequence combiner feeding the scalar score head.

#pragma once

#include <cstdint>

#include "vitr/layers.hpp"
#include "vitr/tensor.hpp"

namespace vitr {

/// Eq 17 as printed scales each node's own vector by its edge gates; the
/// message-passing variant scales the neighbour instead.
enum class FuseVariant { literal, message_passing };

/// Which GRU hidden state is the combined representation.
enum class SeqState { first, last };

struct FusionStage {
  LinearLayer join_global;     // [d1 -> d4]
  LinearLayer join_word;       // [d3 -> d4]
  LinearLayer edge_query;      // [d4 -> d4]
  LinearLayer edge_key;        // [d4 -> d4]
  LinearLayer fuse_map;        // [d4 -> d4]
  GruLayer seq;                // d4 -> d4
  LinearLayer score_head;      // [d4 -> 1]

  static FusionStage init(std::int64_t d1, std::int64_t d3, std::int64_t d4, Rng& rng);
};

/// Squared-difference joins projected to the fusion dimension; row 0 is the
/// global pair, rows 1..n the word-level pairs.
Tensor join(const Tensor& u_glob, const Tensor& v_glob, const Tensor& words,
            const Tensor& aligned_regions, const FusionStage& stage);  // [(n+1), d4]

/// Word-level joins only; the global row is omitted.
Tensor join_words_only(const Tensor& words, const Tensor& aligned_regions,
                       const FusionStage& stage);  // [n, d4]

/// Edge-gated fusion recursed `rounds` times with shared weights; each output
/// feeds the next round's input.
Tensor graph_fuse(const Tensor& joined, const FusionStage& stage, std::int64_t rounds,
                  FuseVariant variant);

/// GRU over the fused rows in order; the selected hidden state passes through
/// the score head and a sigmoid, so the result is strictly inside (0,1).
Tensor score_sequence(const Tensor& fused, const FusionStage& stage, SeqState state);  // scalar

}  // namespace vitr
