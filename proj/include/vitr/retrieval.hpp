// Copyright (c) 2026 vitr authors
// SPDX-License-Identifier: Apache-2.0
//
// Two-stage retrieval: a cheap cosine shortlist over global representations
// selects N candidates, the scoring network reranks only those. Plus the
// Recall@K harness with timing instrumentation.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vitr/features.hpp"
#include "vitr/model.hpp"

namespace vitr {

enum class Direction { image_to_text, text_to_image };

std::string to_string(Direction direction);
Direction direction_from_string(const std::string& s);

/// Candidate global vectors with precomputed norms, ids ascending.
struct GlobalIndex {
  std::vector<std::uint32_t> ids;
  std::int64_t dim = 0;
  std::vector<double> globals;  // row-major [count, dim]
  std::vector<double> norms;

  std::int64_t count() const { return static_cast<std::int64_t>(ids.size()); }

  /// Candidates for the direction: descriptions for image queries, images for
  /// description queries.
  static GlobalIndex build(const Corpus& corpus, Direction direction);
};

/// Top-min(N, count) candidate ids by cosine against the query global,
/// descending score with ascending-id tie break.
std::vector<std::uint32_t> shortlist(const std::vector<double>& query_global,
                                     const GlobalIndex& index, std::int64_t n);

struct ScoredId {
  std::uint32_t id = 0;
  double score = 0.0;
};

struct RankedResult {
  std::uint32_t query_id = 0;
  Direction direction = Direction::image_to_text;
  std::vector<ScoredId> candidates;  // descending score, ascending-id ties
  std::int64_t stage1_n = 0;         // shortlist size requested
  std::int64_t stage2_count = 0;     // scoring-network invocations
};

/// turbo=true: shortlist by globals then rerank the N survivors with the
/// scoring network. turbo=false: score every candidate.
RankedResult retrieve(std::uint32_t query_id, const Corpus& corpus, const VitrModel& model,
                      std::int64_t n, Direction direction, bool turbo, ScoreMode mode);

/// Percentage of queries whose top-K candidates include a relevant item.
double recall_at_k(const std::vector<RankedResult>& results, const Corpus& corpus,
                   std::int64_t k);

struct EvalRow {
  bool turbo = false;
  std::int64_t n = 0;  // shortlist size; candidate count when exhaustive
  double median_ms_per_query = 0.0;
  double recall_at_1 = 0.0;
  double recall_at_5 = 0.0;
  double recall_at_10 = 0.0;
  std::int64_t stage2_per_query = 0;
};

struct EvalReport {
  Direction direction = Direction::image_to_text;
  std::int64_t query_count = 0;
  std::int64_t candidate_count = 0;
  std::vector<EvalRow> rows;  // one per requested N, exhaustive last
};

/// Runs every query of the direction (or the first max_queries) through each
/// turbo setting plus exhaustive scoring. Timing is the median per-query wall
/// clock after one warm-up query.
EvalReport timed_eval(const Corpus& corpus, const VitrModel& model,
                      const std::vector<std::int64_t>& n_values, Direction direction,
                      ScoreMode mode, std::int64_t max_queries = 0);

void write_rankings(const std::vector<RankedResult>& results, const std::filesystem::path& path);
std::string format_eval_table(const EvalReport& report, bool include_timing);
void write_eval_report(const EvalReport& report, const std::filesystem::path& recall_text,
                       const std::filesystem::path& recall_csv,
                       const std::filesystem::path& timing_text,
                       const std::filesystem::path& timing_csv);

}  // namespace vitr
