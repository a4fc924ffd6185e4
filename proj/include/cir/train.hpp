#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cir/composer.hpp"
#include "cir/synthesis.hpp"

namespace cir {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct ModelConfig {
  std::size_t hidden_dim = 64;
  std::size_t vocab_buckets = kDefaultVocabBuckets;
  double tau = kDefaultTau;
};

// Desk-scale defaults. The reference full-scale run used lr 1e-4 and batch 1024.
struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t steps = 500;
  AdamConfig adam;
  std::uint64_t seed = 0;
  SynthConfig synth;

  void validate() const;
};

class AdamOptimizer {
 public:
  AdamOptimizer(const ComposerParams& like, AdamConfig cfg);

  // One bias-corrected Adam update; tau is clamped to [kMinTau, kMaxTau] afterwards.
  void step(ComposerParams& params, const ComposerParams& grad, double learning_rate);
  std::size_t steps_taken() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

// Draws epoch-shuffled, non-overlapping index batches. A dataset smaller than
// the batch size yields the whole (shuffled) dataset each time.
class BatchSampler {
 public:
  BatchSampler(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed);
  std::vector<std::size_t> next();

 private:
  void reshuffle();

  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  Rng rng_;
};

struct TrainResult {
  ComposerParams params;
  std::vector<double> losses;  // batch loss before each update
};

// Turns synthesized triplets back into training samples (target caption and
// embedding looked up by position in `items`).
std::vector<TrainingSample> pretrain_samples(std::span<const CaptionedItem> items,
                                             std::span<const SynthesizedTriplet> triplets);

// Image-caption pretraining with on-the-fly triplet synthesis.
TrainResult train_pretrain(std::span<const CaptionedItem> items, const ModelConfig& model, const TrainConfig& cfg);

// Supervised training on fixed (reference, text, target) triplets.
TrainResult train_triplets(std::span<const TrainingSample> triplets, const ModelConfig& model, const TrainConfig& cfg);

}  // namespace cir
