#include "cir/train.hpp"

#include <algorithm>
#include <cmath>

#include "cir/error.hpp"

namespace cir {

void TrainConfig::validate() const {
  if (batch_size < 2) throw Error(ErrorKind::InvalidArgument, "train.batch_size must be >= 2");
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::InvalidArgument, "train.learning_rate must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 && adam.epsilon > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "invalid Adam hyper-parameters");
  }
  synth.validate();
}

AdamOptimizer::AdamOptimizer(const ComposerParams& like, AdamConfig cfg) : cfg_(cfg) {
  for (auto t : like.tensors()) {
    m_.emplace_back(t.size(), 0.0);
    v_.emplace_back(t.size(), 0.0);
  }
}

void AdamOptimizer::step(ComposerParams& params, const ComposerParams& grad, double learning_rate) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  auto ps = params.tensors();
  auto gs = grad.tensors();
  for (std::size_t k = 0; k < ps.size(); ++k) {
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < ps[k].size(); ++i) {
      const double g = gs[k][i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      ps[k][i] -= learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.epsilon);
    }
  }
  params.tau = std::clamp(params.tau, kMinTau, kMaxTau);
}

BatchSampler::BatchSampler(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed)
    : batch_size_(std::min(batch_size, dataset_size)), order_(dataset_size), rng_(mix_seed(seed, 0xba7c)) {
  if (dataset_size == 0) throw Error(ErrorKind::EmptyDataset, "no training data");
  if (batch_size_ < 2) throw Error(ErrorKind::BatchTooSmall, "need at least two training examples per batch");
  for (std::size_t i = 0; i < dataset_size; ++i) order_[i] = i;
  reshuffle();
}

void BatchSampler::reshuffle() {
  std::shuffle(order_.begin(), order_.end(), rng_);
  cursor_ = 0;
}

std::vector<std::size_t> BatchSampler::next() {
  if (cursor_ + batch_size_ > order_.size()) reshuffle();
  std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                               order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + batch_size_));
  cursor_ += batch_size_;
  return out;
}

std::vector<TrainingSample> pretrain_samples(std::span<const CaptionedItem> items,
                                             std::span<const SynthesizedTriplet> triplets) {
  if (items.size() != triplets.size()) throw Error(ErrorKind::InvalidArgument, "items and triplets differ in length");
  std::vector<TrainingSample> out;
  out.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    out.push_back({triplets[i].reference_embedding, triplets[i].modification_text, items[i].caption,
                   items[i].embedding});
  }
  return out;
}

namespace {

ComposerParams initial_params(std::size_t image_dim, const ModelConfig& model, std::uint64_t seed) {
  ComposerDims dims{image_dim, model.hidden_dim, model.vocab_buckets, image_dim};
  return ComposerParams::initialize(dims, model.tau, seed);
}

}  // namespace

TrainResult train_pretrain(std::span<const CaptionedItem> items, const ModelConfig& model, const TrainConfig& cfg) {
  if (items.empty()) throw Error(ErrorKind::EmptyDataset, "no image-caption pairs to train on");
  cfg.validate();
  TrainResult result{initial_params(items.front().embedding.dim(), model, cfg.seed), {}};
  AdamOptimizer adam(result.params, cfg.adam);
  BatchSampler sampler(items.size(), cfg.batch_size, cfg.seed);
  std::vector<CaptionedItem> batch_items;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    batch_items.clear();
    for (std::size_t idx : sampler.next()) batch_items.push_back(items[idx]);
    Rng synth_rng(mix_seed(cfg.seed, 0x10000 + step));
    const auto triplets = synthesize_batch(batch_items, cfg.synth, synth_rng);
    const auto samples = pretrain_samples(batch_items, triplets);
    auto lg = loss_gradients(result.params, samples, LossMode::Pretrain);
    result.losses.push_back(lg.loss);
    adam.step(result.params, lg.grad, cfg.learning_rate);
  }
  return result;
}

TrainResult train_triplets(std::span<const TrainingSample> triplets, const ModelConfig& model, const TrainConfig& cfg) {
  if (triplets.empty()) throw Error(ErrorKind::EmptyDataset, "no triplets to train on");
  cfg.validate();
  TrainResult result{initial_params(triplets.front().target.dim(), model, cfg.seed), {}};
  AdamOptimizer adam(result.params, cfg.adam);
  BatchSampler sampler(triplets.size(), cfg.batch_size, cfg.seed);
  std::vector<TrainingSample> batch;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    batch.clear();
    for (std::size_t idx : sampler.next()) batch.push_back(triplets[idx]);
    auto lg = loss_gradients(result.params, batch, LossMode::Triplet);
    result.losses.push_back(lg.loss);
    adam.step(result.params, lg.grad, cfg.learning_rate);
  }
  return result;
}

}  // namespace cir
