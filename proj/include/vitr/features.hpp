// Copyright (c) 2026 vitr authors
// SPDX-License-Identifier: Apache-2.0
//
// Encoder outputs as data: per-description global vectors plus word
// embeddings, per-image global vectors plus region features. Sourced from a
// binary feature file or from the deterministic synthetic generator.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vitr/layers.hpp"
#include "vitr/tensor.hpp"

namespace vitr {

struct DescriptionFeatures {
  std::uint32_t id = 0;
  std::uint32_t image_id = 0;
  Tensor u_glob;  // [d1]
  Tensor words;   // U [n, d1]
  std::string text;

  std::int64_t word_count() const { return words.rows(); }
};

struct ImageFeatures {
  std::uint32_t id = 0;
  Tensor v_glob;   // [d1]
  Tensor regions;  // V [k, d2]
};

/// Immutable after load; safe for concurrent read.
struct Corpus {
  std::int64_t d1 = 0;
  std::int64_t d2 = 0;
  std::int64_t k = 0;
  std::vector<ImageFeatures> images;
  std::vector<DescriptionFeatures> descriptions;
  // image id -> relevant description ids, ascending. Each description is
  // relevant to exactly one image.
  std::map<std::uint32_t, std::vector<std::uint32_t>> relevance;

  std::int64_t pair_count() const { return static_cast<std::int64_t>(descriptions.size()); }

  const ImageFeatures& image_by_id(std::uint32_t id) const;
  const DescriptionFeatures& description_by_id(std::uint32_t id) const;
  bool is_relevant(std::uint32_t image_id, std::uint32_t desc_id) const;

  /// Checks every structural invariant; throws DataError naming the offender.
  void validate() const;
  void build_index();

 private:
  std::map<std::uint32_t, std::size_t> image_index_;
  std::map<std::uint32_t, std::size_t> description_index_;
};

Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

struct SynthConfig {
  std::int64_t num_images = 0;
  std::int64_t descriptions_per_image = 0;
  std::int64_t d1 = 0;
  std::int64_t d2 = 0;
  std::int64_t k = 0;
  std::int64_t n = 0;  // words per description
  std::uint64_t seed = 0;
};

/// Deterministic corpus with recoverable structure: images come in pairs that
/// share an object factor and differ only in a relation factor. The object
/// factor dominates the global vectors while the relation factor lives mostly
/// in a designated subset of regions and in dedicated relation words, so
/// telling paired images apart requires region-word alignment.
Corpus synth_corpus(const SynthConfig& config);

Tensor project_regions(const Tensor& regions, const LinearLayer& region_proj);  // [k,d2]->[k,d3]
Tensor project_words(const Tensor& words, const LinearLayer& word_proj);        // [n,d1]->[n,d3]

}  // namespace vitr
