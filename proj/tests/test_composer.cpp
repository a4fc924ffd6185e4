#include <cmath>
#include <random>

#include "cir/checkpoint.hpp"
#include "cir/composer.hpp"
#include "cir/oracle.hpp"
#include "cir/random.hpp"
#include "cir/synthetic.hpp"
#include "cir/train.hpp"
#include "test_util.hpp"

namespace cir {
namespace {

ComposerDims small_dims() { return {4, 6, 16, 4}; }

RealMatrix rows_of(std::initializer_list<std::initializer_list<double>> rows) {
  RealMatrix m(rows.size(), rows.begin()->size());
  std::size_t r = 0;
  for (const auto& row : rows) {
    std::size_t c = 0;
    for (double x : row) m.row(r)[c++] = x;
    ++r;
  }
  return m;
}

std::vector<TrainingSample> random_batch(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g;
  auto draw = [&] {
    std::vector<double> v(dim);
    for (double& x : v) x = g(rng);
    return normalize_span(std::span<const double>(v));
  };
  const char* words[] = {"make it red", "add a hat", "remove the dog", "blue bike", "two cats"};
  std::vector<TrainingSample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({draw(), words[i % 5], words[(i + 2) % 5], draw()});
  return out;
}

TEST(Compose, DeterministicUnitOutput) {
  const auto p = ComposerParams::initialize(small_dims(), 0.07, 3);
  const auto ref = test::unit({0.1f, 0.5f, -0.3f, 0.8f});
  const auto a = compose(p, ref, std::string("add a hat"));
  EXPECT_EQ(a, compose(p, ref, std::string("add a hat")));
  EXPECT_NEAR(l2_norm(a.values()), 1.0, 1e-6);
  EXPECT_EQ(a.dim(), 4u);
}

TEST(Compose, MissingModalitiesAccepted) {
  const auto p = ComposerParams::initialize(small_dims(), 0.07, 3);
  const auto ref = test::unit({0.1f, 0.5f, -0.3f, 0.8f});
  const auto image_only = compose(p, ref, std::nullopt);
  const auto text_only = compose(p, std::nullopt, std::string("add a hat"));
  EXPECT_NE(image_only, text_only);
  EXPECT_CIR_ERROR(compose(p, std::nullopt, std::nullopt), ErrorKind::EmptyQuery);
}

TEST(Compose, MatchesLongDoubleForwardPass) {
  const auto p = ComposerParams::initialize(small_dims(), 0.07, 9);
  const auto ref = test::unit({0.7f, -0.1f, 0.2f, 0.4f});
  const std::string text = "show a red car instead of a blue bike";
  const auto fast = compose_exact(p, &ref, &text);
  const auto slow = oracle::compose_reference(p, &ref, &text);
  ASSERT_EQ(fast.size(), slow.size());
  for (std::size_t i = 0; i < fast.size(); ++i) EXPECT_NEAR(fast[i], static_cast<double>(slow[i]), 1e-12);
}

TEST(Compose, DimensionMismatchRejected) {
  const auto p = ComposerParams::initialize(small_dims(), 0.07, 3);
  EXPECT_CIR_ERROR(compose(p, test::unit({1, 0, 0}), std::nullopt), ErrorKind::DimMismatch);
}

TEST(Contrastive, TwoByTwoIdentityClosedForm) {
  const auto eye = rows_of({{1, 0}, {0, 1}});
  const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
  EXPECT_NEAR(contrastive_loss(eye, eye, 1.0), expected, 1e-15);
  EXPECT_NEAR(expected, 0.3133, 5e-5);
}

TEST(Contrastive, PerfectAlignmentAtLowTemperatureVanishes) {
  const auto eye = rows_of({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  EXPECT_LT(contrastive_loss(eye, eye, 0.01), 1e-30);
}

TEST(Contrastive, Errors) {
  const auto one = rows_of({{1, 0}});
  EXPECT_CIR_ERROR(contrastive_loss(one, one, 0.1), ErrorKind::BatchTooSmall);
  const auto two = rows_of({{1, 0}, {0, 1}});
  const auto wide = rows_of({{1, 0, 0}, {0, 1, 0}});
  EXPECT_CIR_ERROR(contrastive_loss(two, wide, 0.1), ErrorKind::DimMismatch);
}

TEST(Contrastive, GradientMatchesFiniteDifference) {
  const auto q = rows_of({{0.6, 0.8}, {1, 0}, {0, 1}});
  const auto z = rows_of({{0.8, 0.6}, {0, 1}, {0.6, -0.8}});
  const double tau = 0.3;
  const auto g = contrastive_loss_grad(q, z, tau);
  EXPECT_DOUBLE_EQ(g.loss, contrastive_loss(q, z, tau));
  // Rows must stay unit length within 1e-6, which bounds the step size.
  const double h = 1e-8;
  for (std::size_t i = 0; i < q.data.size(); ++i) {
    auto plus = q;
    auto minus = q;
    plus.data[i] += h;
    minus.data[i] -= h;
    const double fd = (contrastive_loss(plus, z, tau) - contrastive_loss(minus, z, tau)) / (2 * h);
    EXPECT_NEAR(g.d_queries.data[i], fd, 1e-6);
  }
  const double fd_tau = (contrastive_loss(q, z, tau + h) - contrastive_loss(q, z, tau - h)) / (2 * h);
  EXPECT_NEAR(g.d_tau, fd_tau, 1e-7);
}

TEST(PretrainLoss, EqualTermsAverageToAnyTerm) {
  // With the adapter, text weights and presence flags zeroed, all three composed
  // queries coincide, so the mean of the three terms equals a single term.
  auto p = ComposerParams::initialize(small_dims(), 0.2, 4);
  std::fill(p.adapter.weight.begin(), p.adapter.weight.end(), 0.0);
  std::fill(p.adapter.bias.begin(), p.adapter.bias.end(), 0.0);
  for (std::size_t r = 0; r < p.fusion_in.out; ++r) {
    for (std::size_t c = p.dims.hidden_dim; c < p.dims.fusion_input(); ++c) p.fusion_in.w(r, c) = 0.0;
  }
  for (double& b : p.fusion_in.bias) b = 0.3;
  std::fill(p.fusion_out.bias.begin(), p.fusion_out.bias.end(), 0.1);
  std::fill(p.projection.bias.begin(), p.projection.bias.end(), 0.0);
  p.projection.bias[0] = 0.5;
  auto batch = random_batch(3, 4, 12);
  const double total = pretrain_loss(p, batch);
  EXPECT_NEAR(total, triplet_loss(p, batch), 1e-12);
}

TEST(PretrainLoss, MatchesReferenceOnHandBatch) {
  const auto p = ComposerParams::initialize(small_dims(), 0.1, 5);
  const auto batch = random_batch(2, 4, 13);
  EXPECT_NEAR(pretrain_loss(p, batch), static_cast<double>(oracle::loss_reference(p, batch, LossMode::Pretrain)),
              1e-12);
  EXPECT_NEAR(triplet_loss(p, batch), static_cast<double>(oracle::loss_reference(p, batch, LossMode::Triplet)),
              1e-12);
}

TEST(LossGradients, MatchFiniteDifferences) {
  for (LossMode mode : {LossMode::Pretrain, LossMode::Triplet}) {
    auto p = ComposerParams::initialize(small_dims(), 0.15, 21);
    const auto batch = random_batch(3, 4, 22);
    const auto analytic = loss_gradients(p, batch, mode);
    const auto numeric = oracle::finite_difference_gradient(p, batch, mode, 1e-5);
    const auto ta = analytic.grad.tensors();
    const auto tn = numeric.tensors();
    for (std::size_t k = 0; k < ta.size(); ++k) {
      for (std::size_t i = 0; i < ta[k].size(); ++i) {
        EXPECT_NEAR(ta[k][i], tn[k][i], 1e-6 + 1e-4 * std::abs(tn[k][i])) << "tensor " << k << " entry " << i;
      }
    }
    EXPECT_NEAR(analytic.grad.tau, numeric.tau, 1e-6 + 1e-4 * std::abs(numeric.tau));
  }
}

TEST(LossGradients, StationaryWhenEverythingIsZero) {
  // Zero weights give identical queries regardless of input, and identical
  // targets make every softmax uniform: the gradient vanishes.
  auto p = ComposerParams::zeros(small_dims());
  p.projection.bias = {1, 0, 0, 0};
  p.tau = 0.5;
  auto batch = random_batch(3, 4, 30);
  for (auto& s : batch) s.target = test::unit({0, 1, 0, 0});
  const auto lg = loss_gradients(p, batch, LossMode::Triplet);
  EXPECT_NEAR(lg.loss, std::log(3.0), 1e-12);
  for (auto t : lg.grad.tensors()) {
    for (double g : t) EXPECT_NEAR(g, 0.0, 1e-12);
  }
  EXPECT_NEAR(lg.grad.tau, 0.0, 1e-12);
}

TEST(Train, ZeroStepsKeepsInitialization) {
  const auto corpus = synthetic::make_corpus({});
  ModelConfig model;
  model.hidden_dim = 8;
  TrainConfig cfg;
  cfg.steps = 0;
  cfg.seed = 4;
  const auto r = train_triplets(corpus.triplets, model, cfg);
  EXPECT_TRUE(r.losses.empty());
  ComposerDims dims{16, 8, model.vocab_buckets, 16};
  EXPECT_EQ(r.params, ComposerParams::initialize(dims, model.tau, cfg.seed));
}

TEST(Train, SeededRunsRepeatExactly) {
  const auto corpus = synthetic::make_corpus({});
  ModelConfig model;
  model.hidden_dim = 16;
  TrainConfig cfg;
  cfg.steps = 20;
  cfg.batch_size = 16;
  cfg.seed = 8;
  const auto a = train_pretrain(corpus.items, model, cfg);
  const auto b = train_pretrain(corpus.items, model, cfg);
  EXPECT_EQ(a.losses, b.losses);
  EXPECT_EQ(a.params, b.params);
}

TEST(Train, LossDecreasesOnSyntheticTask) {
  const auto corpus = synthetic::make_corpus({});
  ModelConfig model;
  TrainConfig cfg;
  cfg.steps = 100;
  cfg.seed = 1;
  const auto r = train_pretrain(corpus.items, model, cfg);
  ASSERT_EQ(r.losses.size(), 100u);
  EXPECT_LT(r.losses.back(), r.losses.front());
  EXPECT_TRUE(r.params.all_finite());
  EXPECT_GE(r.params.tau, kMinTau);
  EXPECT_LE(r.params.tau, kMaxTau);
}

TEST(Train, EmptyAndInvalidInputs) {
  ModelConfig model;
  TrainConfig cfg;
  EXPECT_CIR_ERROR(train_triplets({}, model, cfg), ErrorKind::EmptyDataset);
  const auto corpus = synthetic::make_corpus({});
  cfg.batch_size = 1;
  EXPECT_CIR_ERROR(train_triplets(corpus.triplets, model, cfg), ErrorKind::InvalidArgument);
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto dir = test::scratch_dir("checkpoint");
  auto p = ComposerParams::initialize(small_dims(), 0.42, 17);
  // Float-representable values so the float32 weight blob is lossless.
  for (auto t : p.tensors()) {
    for (double& x : t) x = static_cast<float>(x);
  }
  p.tau = 0.25;
  save_checkpoint(dir / "ck.json", p, {7, 120, {1.5, 0.25}});
  const auto loaded = load_checkpoint(dir / "ck.json");
  EXPECT_EQ(loaded.params, p);
  EXPECT_EQ(loaded.params.tau, p.tau);
  EXPECT_EQ(loaded.info.seed, 7u);
  EXPECT_EQ(loaded.info.step, 120u);
  EXPECT_EQ(loaded.info.losses, (std::vector<double>{1.5, 0.25}));
}

TEST(Checkpoint, MissingFileIsAnIoError) {
  EXPECT_CIR_ERROR(load_checkpoint("/nonexistent/ck.json"), ErrorKind::Io);
}

}  // namespace
}  // namespace cir
