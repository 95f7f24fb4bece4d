// Copyright (c) 2026 vitr authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vitr/features.hpp"
#include "vitr/fusion.hpp"
#include "vitr/reasoning.hpp"

namespace vitr {

enum class ScoreMode { full, no_vit, no_rel };

std::string to_string(ScoreMode mode);
ScoreMode score_mode_from_string(const std::string& s);

struct ModelConfig {
  // Corpus-side dimensions the model binds to.
  std::int64_t d1 = 0;
  std::int64_t d2 = 0;
  std::int64_t k = 0;
  // Network dimensions.
  std::int64_t unified_dim = 256;  // d3
  std::int64_t fusion_dim = 128;   // d4
  double gamma = 12.0;
  std::int64_t reasoning_rounds = 4;  // g1
  std::int64_t fusion_rounds = 2;     // g2
  bool shared_reasoning_weights = true;
  FuseVariant fuse_variant = FuseVariant::literal;
  SeqState seq_state = SeqState::first;
  ScoreMode mode = ScoreMode::full;

  void validate() const;
};

/// Every trainable weight, addressable by name for checkpoints and ablation.
struct VitrParams {
  LinearLayer region_proj;  // [d2 -> d3]
  LinearLayer word_proj;    // [d1 -> d3]
  std::vector<ReasoningRound> reasoning;  // 1 entry when weights are shared
  FusionStage fusion;
  // Sequence poolers that replace relational reasoning in no_rel mode.
  GruLayer norel_text;    // d3 -> d3
  GruLayer norel_region;  // d3 -> d3

  static VitrParams init(const ModelConfig& config, Rng& rng);

  /// Stable name -> tensor enumeration; the order fixes checkpoint layout.
  std::vector<std::pair<std::string, Tensor>> named_tensors() const;
  void zero_grad() const;
};

struct VitrModel {
  ModelConfig config;
  VitrParams params;
};

VitrModel init_model(const ModelConfig& config, std::uint64_t seed);

/// Model dimensions must agree with the corpus before scoring it.
void check_model_corpus(const VitrModel& model, const Corpus& corpus);

/// Similarity score in (0,1) for one image-description pair. Tracked when the
/// tape is live, so it doubles as the training forward pass.
Tensor vitr_score(const ImageFeatures& image, const DescriptionFeatures& description,
                  const VitrModel& model, ScoreMode mode);

/// Forward-only convenience; never records the tape.
double vitr_score_value(const ImageFeatures& image, const DescriptionFeatures& description,
                        const VitrModel& model, ScoreMode mode);

/// Score plus the attention trace (full mode only) for heat-map export.
std::pair<double, AttentionTrace> vitr_score_traced(const ImageFeatures& image,
                                                    const DescriptionFeatures& description,
                                                    const VitrModel& model);

void save_checkpoint(const VitrModel& model, const std::filesystem::path& path);
VitrModel load_checkpoint(const std::filesystem::path& path);

}  // namespace vitr
