#include <random>
#include <set>

#include "cir/random.hpp"
#include "cir/synthesis.hpp"
#include "cir/text.hpp"
#include "test_util.hpp"

namespace cir {
namespace {

using test::unit;

std::vector<CaptionedItem> toy_items(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g;
  std::vector<CaptionedItem> items;
  const char* colors[] = {"red", "blue", "green", "white"};
  const char* things[] = {"car", "bike", "dog", "lamp"};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(dim);
    for (double& x : v) x = g(rng);
    items.push_back({"i" + std::to_string(i), std::string("a ") + colors[i % 4] + " " + things[(i / 4) % 4],
                     normalize_span(std::span<const double>(v))});
  }
  return items;
}

TEST(Augment, ZeroSigmaIsIdentity) {
  Rng rng(1);
  const auto e = unit({0.2f, 0.4f, -0.1f});
  EXPECT_EQ(augment_embedding(e, 0.0, rng), e);
}

TEST(Augment, SmallNoiseStaysClose) {
  const auto e = toy_items(1, 16, 5)[0].embedding;
  Rng r1(42);
  Rng r2(42);
  const auto a = augment_embedding(e, 0.05, r1);
  EXPECT_EQ(a, augment_embedding(e, 0.05, r2));
  EXPECT_GT(cosine_sim(a, e), 0.9);
}

TEST(Augment, LargeNoiseStillUnit) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    EXPECT_NEAR(l2_norm(augment_embedding(unit({1, 0}), 10.0, rng).values()), 1.0, 1e-6);
  }
}

TEST(Nearest, Examples) {
  const std::vector<UnitEmbedding> fan = {unit({1, 0}), unit({0.8f, 0.6f}), unit({0, 1})};
  EXPECT_EQ(nearest_in_batch(fan, 0), 1u);
  const std::vector<UnitEmbedding> two = {unit({1, 0}), unit({-0.5f, 1})};
  EXPECT_EQ(nearest_in_batch(two, 0), 1u);
}

TEST(Nearest, TiesGoToLowerIndex) {
  const std::vector<UnitEmbedding> batch = {unit({1, 0, 0}), unit({0.6f, 0.8f, 0}), unit({0, 0, 1}),
                                            unit({0.6f, 0, 0.8f})};
  EXPECT_EQ(nearest_in_batch(batch, 0), 1u);
}

TEST(Nearest, SingletonRejected) {
  const std::vector<UnitEmbedding> one = {unit({1, 0})};
  EXPECT_CIR_ERROR(nearest_in_batch(one, 0), ErrorKind::BatchTooSmall);
}

TEST(Templates, PublishedExamples) {
  EXPECT_EQ(synthesize_mod_text("a red car", "a blue bike", 1), "show a red car instead of a blue bike");
  EXPECT_EQ(synthesize_mod_text("a red car", "a blue bike", 13), "remove a blue bike, add a red car");
  EXPECT_CIR_ERROR(synthesize_mod_text("x", "y", 16), ErrorKind::UnknownTemplate);
  EXPECT_CIR_ERROR(synthesize_mod_text("x", "y", 0), ErrorKind::UnknownTemplate);
}

TEST(Templates, EveryTemplateMentionsBothCaptions) {
  for (int id = 1; id <= kTemplateCount; ++id) {
    const auto s = synthesize_mod_text("TARGET", "NEIGHBOR", id);
    EXPECT_NE(s.find("TARGET"), std::string::npos) << id;
    EXPECT_NE(s.find("NEIGHBOR"), std::string::npos) << id;
  }
}

TEST(SynthesizeBatch, RatioBounds) {
  const auto items = toy_items(16, 8, 9);
  SynthConfig cfg;
  cfg.text_synthesis_ratio = 1.0;
  Rng rng(1);
  for (const auto& t : synthesize_batch(items, cfg, rng)) {
    EXPECT_TRUE(t.text_was_synthesized);
    EXPECT_TRUE(t.template_id.has_value());
  }
  cfg.text_synthesis_ratio = 0.0;
  const auto out = synthesize_batch(items, cfg, rng);
  for (std::size_t i = 0; i < items.size(); ++i) {
    EXPECT_FALSE(out[i].text_was_synthesized);
    EXPECT_FALSE(out[i].template_id.has_value());
    EXPECT_EQ(out[i].modification_text, items[i].caption);
  }
}

TEST(SynthesizeBatch, Deterministic) {
  const auto items = toy_items(8, 16, 2);
  SynthConfig cfg;
  Rng r1(77);
  Rng r2(77);
  const auto a = synthesize_batch(items, cfg, r1);
  const auto b = synthesize_batch(items, cfg, r2);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].reference_embedding, b[i].reference_embedding);
    EXPECT_EQ(a[i].modification_text, b[i].modification_text);
    EXPECT_EQ(a[i].neighbor_id, b[i].neighbor_id);
    EXPECT_EQ(a[i].template_id, b[i].template_id);
  }
}

TEST(SynthesizeBatch, ReferenceIsSlerpOfAugmentedPair) {
  const auto items = toy_items(12, 16, 4);
  SynthConfig cfg;
  cfg.alpha = 0.3;
  Rng rng(5);
  for (const auto& t : synthesize_batch(items, cfg, rng)) {
    EXPECT_EQ(t.reference_embedding, slerp(t.augmented_target, t.augmented_neighbor, cfg.alpha));
    EXPECT_NE(t.neighbor_id, t.target_id);
  }
}

TEST(SynthesizeBatch, RandomModeNeverPicksSelf) {
  const auto items = toy_items(5, 8, 6);
  SynthConfig cfg;
  cfg.neighbor_mode = NeighborMode::Random;
  Rng rng(8);
  for (int rep = 0; rep < 50; ++rep) {
    for (const auto& t : synthesize_batch(items, cfg, rng)) EXPECT_NE(t.neighbor_id, t.target_id);
  }
}

TEST(SynthesizeBatch, ConfigValidation) {
  const auto items = toy_items(4, 4, 1);
  Rng rng(1);
  SynthConfig cfg;
  cfg.template_ids = {3, 16};
  EXPECT_CIR_ERROR(synthesize_batch(items, cfg, rng), ErrorKind::UnknownTemplate);
  cfg = {};
  cfg.alpha = 1.2;
  EXPECT_CIR_ERROR(synthesize_batch(items, cfg, rng), ErrorKind::InvalidArgument);
  cfg = {};
  EXPECT_CIR_ERROR(synthesize_batch(std::span(items).first(1), cfg, rng), ErrorKind::BatchTooSmall);
}

TEST(Text, Featurization) {
  const auto empty = featurize_text("", 64);
  for (double x : empty) EXPECT_EQ(x, 0.0);
  EXPECT_EQ(featurize_text("cat cat", 64), featurize_text("cat", 64));
  EXPECT_EQ(featurize_text("red car", 64), featurize_text("red car", 64));
  EXPECT_EQ(featurize_text("Red, CAR!", 64), featurize_text("red car", 64));
}

TEST(Text, InstructionTemplate) {
  const auto both = assemble_instruction(true, std::string("add a hat"));
  EXPECT_NE(both.find("Image:"), std::string::npos);
  EXPECT_NE(both.find("Text: add a hat"), std::string::npos);
  const auto image_only = assemble_instruction(true, std::nullopt);
  EXPECT_NE(image_only.find("Image:"), std::string::npos);
  EXPECT_EQ(image_only.find("Text:"), std::string::npos);
  const auto text_only = assemble_instruction(false, std::string("a dog"));
  EXPECT_EQ(text_only.find("Image:"), std::string::npos);
  EXPECT_CIR_ERROR(assemble_instruction(false, std::nullopt), ErrorKind::EmptyQuery);
}

}  // namespace
}  // namespace cir
