// Copyright (c) 2026 vitr authors
// SPDX-License-Identifier: Apache-2.0
//
// Reduced description representations for the semantic margin factors: a
// term-count matrix over tokenized description texts, truncated by SVD.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vitr/features.hpp"
#include "vitr/tensor.hpp"

namespace vitr {

/// Lowercased alphanumeric runs, in order of appearance.
std::vector<std::string> tokenize_terms(const std::string& text);

/// Term counts per description. Rows follow corpus description order; columns
/// follow sorted vocabulary order.
struct TermMatrix {
  std::vector<std::string> vocabulary;
  std::vector<std::uint32_t> row_ids;  // description id per row
  Tensor counts;                       // A [m, w]
};

TermMatrix build_term_matrix(const Corpus& corpus);

/// Rank-limited SVD A ~ left * diag(values) * right^T, singular values in
/// descending order. Computed through the eigendecomposition of A^T A with a
/// deterministic sign convention (first nonzero component of each right
/// singular vector positive).
struct TruncatedSvd {
  Tensor left;                        // X [m, rank]
  std::vector<double> values;         // rank entries, descending
  Tensor right;                       // Y [w, rank]
};

TruncatedSvd truncated_svd(const Tensor& a, std::int64_t rank);

/// ||A - X diag(values) Y^T||_F.
double reconstruction_error(const Tensor& a, const TruncatedSvd& svd);

struct SemanticIndex {
  std::vector<std::string> vocabulary;
  Tensor right_vectors;                          // Y [w, d5]
  Tensor reduced;                                // B = A Y [m, d5]
  std::vector<double> singular_values;           // descending
  std::map<std::uint32_t, std::int64_t> row_of;  // description id -> row of B
  std::int64_t d5 = 0;
};

SemanticIndex build_semantic_index(const Corpus& corpus, std::int64_t d5);

/// lambda * cos(reduced_p, reduced_q); zero-norm reduced vectors yield 0.
double semantic_factor(std::uint32_t p, std::uint32_t q, const SemanticIndex& index,
                       double lambda);

}  // namespace vitr
