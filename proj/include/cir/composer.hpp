#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cir/embedding.hpp"
#include "cir/text.hpp"

namespace cir {

inline constexpr double kMinTau = 0.01;
inline constexpr double kMaxTau = 1.0;
inline constexpr double kDefaultTau = 0.07;

// Fully connected layer, y = W x + b with W stored out x in, row-major.
struct Dense {
  std::size_t out = 0;
  std::size_t in = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  Dense() = default;
  Dense(std::size_t out_dim, std::size_t in_dim) : out(out_dim), in(in_dim), weight(out_dim * in_dim), bias(out_dim) {}

  double& w(std::size_t r, std::size_t c) { return weight[r * in + c]; }
  double w(std::size_t r, std::size_t c) const { return weight[r * in + c]; }
};

struct ComposerDims {
  std::size_t image_dim = 0;   // reference / target embedding dimension
  std::size_t hidden_dim = 0;  // adapter and fusion width
  std::size_t vocab_buckets = kDefaultVocabBuckets;
  std::size_t output_dim = 0;  // composed query dimension; equals image_dim for retrieval

  // Fusion input: [adapter output | text features | image flag | text flag].
  std::size_t fusion_input() const noexcept { return hidden_dim + vocab_buckets + 2; }
  std::size_t image_flag() const noexcept { return hidden_dim + vocab_buckets; }
  std::size_t text_flag() const noexcept { return hidden_dim + vocab_buckets + 1; }

  friend bool operator==(const ComposerDims&, const ComposerDims&) = default;
};

// Adapter -> two-layer tanh fusion -> projection, plus the contrastive
// temperature. Also used as the gradient container (same shapes).
struct ComposerParams {
  ComposerDims dims;
  Dense adapter;     // hidden x image
  Dense fusion_in;   // hidden x fusion_input
  Dense fusion_out;  // hidden x hidden
  Dense projection;  // output x hidden
  double tau = kDefaultTau;

  // Weights ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
  static ComposerParams initialize(const ComposerDims& dims, double tau, std::uint64_t seed);
  static ComposerParams zeros(const ComposerDims& dims);

  // Every trainable tensor in a fixed order; tau is the last, one-element span.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;

  std::size_t parameter_count() const;
  bool all_finite() const;
  void validate() const;

  friend bool operator==(const ComposerParams&, const ComposerParams&);
};

struct RealMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  RealMatrix() = default;
  RealMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

// Composed query. c^v with only `reference`, c^w with only `text`, c with both.
UnitEmbedding compose(const ComposerParams& params, const std::optional<UnitEmbedding>& reference,
                      const std::optional<std::string>& text);

// Same as compose() but kept in double precision.
std::vector<double> compose_exact(const ComposerParams& params, const UnitEmbedding* reference,
                                  const std::string* text);

// Symmetric InfoNCE over S = queries * targets^T / tau with the diagonal as
// positives: 0.5 * (mean row cross-entropy + mean column cross-entropy).
double contrastive_loss(const RealMatrix& queries, const RealMatrix& targets, double tau);

struct ContrastiveGrad {
  double loss = 0.0;
  RealMatrix d_queries;
  double d_tau = 0.0;
};
ContrastiveGrad contrastive_loss_grad(const RealMatrix& queries, const RealMatrix& targets, double tau);

// One training example. In pretraining `reference` is the synthesized h*,
// `modification_text` is w* and `caption` is the target caption w_i. Triplet
// training ignores `caption`.
struct TrainingSample {
  UnitEmbedding reference;
  std::string modification_text;
  std::string caption;
  UnitEmbedding target;
};

enum class LossMode { Pretrain, Triplet };

// (1/3) [L(c^v, z) + L(c^w, z) + L(c, z)]
double pretrain_loss(const ComposerParams& params, std::span<const TrainingSample> batch);
// L(c, z)
double triplet_loss(const ComposerParams& params, std::span<const TrainingSample> batch);

struct LossGradients {
  double loss = 0.0;
  ComposerParams grad;
};

// Exact gradients of pretrain_loss / triplet_loss with respect to every
// parameter, tau included. Per-sample forward passes run in parallel; the
// backward reduction is sequential in batch order.
LossGradients loss_gradients(const ComposerParams& params, std::span<const TrainingSample> batch, LossMode mode);

double loss_value(const ComposerParams& params, std::span<const TrainingSample> batch, LossMode mode);

}  // namespace cir
