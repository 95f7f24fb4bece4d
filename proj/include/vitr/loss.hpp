// Copyright (c) 2026 vitr authors
// SPDX-License-Identifier: Apache-2.0
//
// Hardest-negative hinge training with semantic margin factors, and the Adam
// loop that drives it.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vitr/features.hpp"
#include "vitr/model.hpp"
#include "vitr/semantic.hpp"

namespace vitr {

struct TrainConfig {
  double alpha = 0.185;    // hinge margin
  double lambda = 0.025;   // semantic factor temperature
  std::int64_t batch_size = 128;
  std::int64_t epochs = 20;
  double learning_rate = 0.0004;
  double lr_decay = 0.1;
  std::int64_t lr_decay_epoch = 5;  // decayed rate applies from this 1-based epoch on
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::int64_t semantic_dim = 32;  // d5
  int threads = 0;                 // score-matrix fill; 0 = hardware concurrency

  void validate() const;
};

/// Mean hinge loss over the batch. `scores` and `factors` are row-major [b,b];
/// scores[p][q] = s(I_p, D_q) with relevant pairs on the diagonal, factors
/// hold the lambda-scaled description cosines. Negatives are the other batch
/// members; only the hardest one per direction contributes.
double lseh_loss(const std::vector<double>& scores, const std::vector<double>& factors,
                 std::int64_t b, double alpha);

/// Decoupled per-pair hinge terms (caption-negative, image-negative), mainly
/// for inspection in tests; lseh_loss is the mean of their sums.
std::vector<std::pair<double, double>> lseh_loss_terms(const std::vector<double>& scores,
                                                       const std::vector<double>& factors,
                                                       std::int64_t b, double alpha);

class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<std::pair<std::string, Tensor>> params, double beta1, double beta2,
                double eps);
  void step(double lr);
  void zero_grad();
  /// Name of the parameter with the largest gradient magnitude; non-finite
  /// entries dominate. Used by the non-finite-loss abort diagnostic.
  std::string largest_gradient_name() const;

 private:
  struct Slot {
    std::string name;
    Tensor tensor;
    std::vector<double> m;
    std::vector<double> v;
  };
  std::vector<Slot> slots_;
  std::int64_t step_count_ = 0;
  double beta1_, beta2_, eps_;
};

struct EpochStats {
  std::int64_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
};

/// LSEH training over the corpus pairs; the model is updated in place and the
/// per-epoch loss history returned. Encoder features are fixed inputs; every
/// model weight trains. Trailing partial batches are dropped.
TrainResult train(const Corpus& corpus, VitrModel& model, const TrainConfig& config,
                  std::uint64_t seed);

void write_loss_history(const TrainResult& result, const std::filesystem::path& path);

}  // namespace vitr
