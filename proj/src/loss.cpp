// Copyright (c) 2026 vitr authors
// SPDX-License-Identifier: Apache-2.0

#include "vitr/loss.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <thread>

#include "vitr/errors.hpp"

namespace vitr {

void TrainConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("train config: alpha must be positive");
  if (lambda < 0.0) throw ConfigError("train config: lambda must be nonnegative");
  if (batch_size < 2) throw ConfigError("train config: batch size must be >= 2");
  if (epochs < 0) throw ConfigError("train config: epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("train config: learning rate must be positive");
  if (semantic_dim < 1) throw ConfigError("train config: d5 must be >= 1");
}

std::vector<std::pair<double, double>> lseh_loss_terms(const std::vector<double>& scores,
                                                       const std::vector<double>& factors,
                                                       std::int64_t b, double alpha) {
  if (b < 2) throw ConfigError("lseh loss requires a batch of >= 2 pairs");
  if (scores.size() != static_cast<std::size_t>(b * b) ||
      factors.size() != static_cast<std::size_t>(b * b))
    throw DimensionError("lseh loss: matrices must be [b x b] with b=" + std::to_string(b));

  std::vector<std::pair<double, double>> terms(static_cast<std::size_t>(b));
  for (std::int64_t p = 0; p < b; ++p) {
    const double positive = scores[static_cast<std::size_t>(p * b + p)];
    double caption_arg = -HUGE_VAL;  // hardest negative description for I_p
    double image_arg = -HUGE_VAL;    // hardest negative image for D_p
    for (std::int64_t q = 0; q < b; ++q) {
      if (q == p) continue;
      const double margin = alpha + factors[static_cast<std::size_t>(p * b + q)];
      caption_arg = std::max(caption_arg,
                             (scores[static_cast<std::size_t>(p * b + q)] - positive) + margin);
      image_arg = std::max(image_arg,
                           (scores[static_cast<std::size_t>(q * b + p)] - positive) + margin);
    }
    terms[static_cast<std::size_t>(p)] = {std::max(caption_arg, 0.0), std::max(image_arg, 0.0)};
  }
  return terms;
}

double lseh_loss(const std::vector<double>& scores, const std::vector<double>& factors,
                 std::int64_t b, double alpha) {
  const auto terms = lseh_loss_terms(scores, factors, b, alpha);
  double total = 0.0;
  for (const auto& [caption_term, image_term] : terms) total += caption_term + image_term;
  return total / static_cast<double>(b);
}

AdamOptimizer::AdamOptimizer(std::vector<std::pair<std::string, Tensor>> params, double beta1,
                             double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  slots_.reserve(params.size());
  for (auto& [name, tensor] : params) {
    Slot slot;
    slot.name = std::move(name);
    slot.tensor = tensor;
    slot.m.assign(tensor.data().size(), 0.0);
    slot.v.assign(tensor.data().size(), 0.0);
    slots_.push_back(std::move(slot));
  }
}

void AdamOptimizer::step(double lr) {
  ++step_count_;
  const double bias1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  for (auto& slot : slots_) {
    const std::vector<double> grad = slot.tensor.grad();
    auto& data = slot.tensor.data_mut();
    for (std::size_t i = 0; i < data.size(); ++i) {
      slot.m[i] = beta1_ * slot.m[i] + (1.0 - beta1_) * grad[i];
      slot.v[i] = beta2_ * slot.v[i] + (1.0 - beta2_) * grad[i] * grad[i];
      const double m_hat = slot.m[i] / bias1;
      const double v_hat = slot.v[i] / bias2;
      data[i] -= lr * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

void AdamOptimizer::zero_grad() {
  for (auto& slot : slots_) slot.tensor.zero_grad();
}

std::string AdamOptimizer::largest_gradient_name() const {
  std::string best_name = "<none>";
  double best = -1.0;
  for (const auto& slot : slots_) {
    for (double g : slot.tensor.grad()) {
      const double mag = std::isfinite(g) ? std::abs(g) : HUGE_VAL;
      if (mag > best) {
        best = mag;
        best_name = slot.name;
      }
    }
  }
  return best_name;
}

namespace {

void parallel_for(std::int64_t begin, std::int64_t end, int threads,
                  const std::function<void(std::int64_t)>& body) {
  const std::int64_t count = end - begin;
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min<int>(threads, static_cast<int>(count)));
  if (threads == 1) {
    for (std::int64_t i = begin; i < end; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads - 1));
  const std::int64_t chunk = (count + threads - 1) / threads;
  for (int t = 1; t < threads; ++t) {
    const std::int64_t lo = begin + chunk * t;
    const std::int64_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] {
      for (std::int64_t i = lo; i < hi; ++i) body(i);
    });
  }
  const std::int64_t hi0 = std::min(end, begin + chunk);
  for (std::int64_t i = begin; i < hi0; ++i) body(i);
  for (auto& th : pool) th.join();
}

}  // namespace

TrainResult train(const Corpus& corpus, VitrModel& model, const TrainConfig& config,
                  std::uint64_t seed) {
  config.validate();
  check_model_corpus(model, corpus);
  const std::int64_t m = corpus.pair_count();
  if (m < config.batch_size)
    throw ConfigError("training requires >= batch_size pairs, corpus has " + std::to_string(m));

  const SemanticIndex index = build_semantic_index(corpus, config.semantic_dim);
  AdamOptimizer optimizer(model.params.named_tensors(), config.adam_beta1, config.adam_beta2,
                          config.adam_eps);
  Rng shuffle_rng = Rng(seed).fork(0x73687566);  // shuffle stream
  const ScoreMode mode = model.config.mode;
  const std::int64_t b = config.batch_size;

  std::vector<std::int64_t> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  for (std::int64_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr =
        config.learning_rate * (epoch >= config.lr_decay_epoch ? config.lr_decay : 1.0);
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    std::int64_t batch_count = 0;
    for (std::int64_t start = 0; start + b <= m; start += b) {
      // Batch members are description indices; each carries its paired image.
      std::vector<const DescriptionFeatures*> descs(static_cast<std::size_t>(b));
      std::vector<const ImageFeatures*> imgs(static_cast<std::size_t>(b));
      for (std::int64_t i = 0; i < b; ++i) {
        const auto& desc = corpus.descriptions[static_cast<std::size_t>(
            order[static_cast<std::size_t>(start + i)])];
        descs[static_cast<std::size_t>(i)] = &desc;
        imgs[static_cast<std::size_t>(i)] = &corpus.image_by_id(desc.image_id);
      }

      std::vector<double> factors(static_cast<std::size_t>(b * b), 0.0);
      for (std::int64_t p = 0; p < b; ++p)
        for (std::int64_t q = 0; q < b; ++q)
          factors[static_cast<std::size_t>(p * b + q)] = semantic_factor(
              descs[static_cast<std::size_t>(p)]->id, descs[static_cast<std::size_t>(q)]->id,
              index, config.lambda);

      // Forward-only score matrix; rows fan out across threads, every scorer
      // invocation is read-only on the model.
      std::vector<double> scores(static_cast<std::size_t>(b * b), 0.0);
      parallel_for(0, b, config.threads, [&](std::int64_t p) {
        for (std::int64_t q = 0; q < b; ++q)
          scores[static_cast<std::size_t>(p * b + q)] =
              vitr_score_value(*imgs[static_cast<std::size_t>(p)],
                               *descs[static_cast<std::size_t>(q)], model, mode);
      });

      const double batch_loss = lseh_loss(scores, factors, b, config.alpha);
      loss_sum += batch_loss;
      ++batch_count;

      // Only the positives and the per-direction hardest negatives carry
      // gradient; re-run just those pairs with the tape on.
      std::map<std::pair<std::int64_t, std::int64_t>, Tensor> tracked;
      auto tracked_score = [&](std::int64_t p, std::int64_t q) -> Tensor {
        auto it = tracked.find({p, q});
        if (it != tracked.end()) return it->second;
        Tensor s = vitr_score(*imgs[static_cast<std::size_t>(p)],
                              *descs[static_cast<std::size_t>(q)], model, mode);
        tracked.emplace(std::make_pair(p, q), s);
        return s;
      };

      Tensor total;
      for (std::int64_t p = 0; p < b; ++p) {
        const double positive = scores[static_cast<std::size_t>(p * b + p)];
        std::int64_t caption_neg = -1, image_neg = -1;
        double caption_best = -HUGE_VAL, image_best = -HUGE_VAL;
        for (std::int64_t q = 0; q < b; ++q) {
          if (q == p) continue;
          const double margin = config.alpha + factors[static_cast<std::size_t>(p * b + q)];
          const double c_arg = (scores[static_cast<std::size_t>(p * b + q)] - positive) + margin;
          const double i_arg = (scores[static_cast<std::size_t>(q * b + p)] - positive) + margin;
          if (c_arg > caption_best) {
            caption_best = c_arg;
            caption_neg = q;
          }
          if (i_arg > image_best) {
            image_best = i_arg;
            image_neg = q;
          }
        }
        const Tensor pos = tracked_score(p, p);
        const Tensor caption_term =
            relu(add_scalar(subtract(tracked_score(p, caption_neg), pos),
                            config.alpha + factors[static_cast<std::size_t>(p * b + caption_neg)]));
        const Tensor image_term =
            relu(add_scalar(subtract(tracked_score(image_neg, p), pos),
                            config.alpha + factors[static_cast<std::size_t>(p * b + image_neg)]));
        const Tensor pair_term = add(caption_term, image_term);
        total = total.defined() ? add(total, pair_term) : pair_term;
      }
      total = mul_scalar(total, 1.0 / static_cast<double>(b));

      optimizer.zero_grad();
      backward(total);
      if (!std::isfinite(batch_loss) || !std::isfinite(total.value()))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                           "; largest gradient in parameter " +
                           optimizer.largest_gradient_name());
      optimizer.step(lr);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = batch_count > 0 ? loss_sum / static_cast<double>(batch_count) : 0.0;
    stats.learning_rate = lr;
    result.history.push_back(stats);
  }
  return result;
}

void write_loss_history(const TrainResult& result, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write loss history to " + path.string());
  for (const auto& stats : result.history) {
    char line[128];
    std::snprintf(line, sizeof(line), "%lld,%.17g,%.17g\n",
                  static_cast<long long>(stats.epoch), stats.mean_loss, stats.learning_rate);
    os << line;
  }
}

}  // namespace vitr
