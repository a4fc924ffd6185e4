#include <cmath>
#include <numbers>
#include <random>

#include "cir/embedding.hpp"
#include "cir/random.hpp"
#include "test_util.hpp"

namespace cir {
namespace {

using test::unit;

TEST(Normalize, ThreeFourFive) {
  const auto u = normalize(EmbeddingVector({3.0f, 4.0f}));
  EXPECT_FLOAT_EQ(u[0], 0.6f);
  EXPECT_FLOAT_EQ(u[1], 0.8f);
}

TEST(Normalize, UnitVectorUnchanged) {
  const auto u = normalize(EmbeddingVector({1.0f, 0.0f, 0.0f}));
  EXPECT_EQ(u, UnitEmbedding::from_unit({1.0f, 0.0f, 0.0f}));
}

TEST(Normalize, ZeroVectorRejected) { EXPECT_CIR_ERROR(normalize(EmbeddingVector({0.0f, 0.0f})), ErrorKind::ZeroVector); }

TEST(Normalize, NonFiniteRejected) {
  EXPECT_CIR_ERROR(normalize(EmbeddingVector({NAN, 1.0f})), ErrorKind::NonFinite);
}

TEST(Normalize, IdempotentBitForBit) {
  Rng rng(11);
  std::normal_distribution<float> g(0.0f, 3.0f);
  for (int c = 0; c < 2000; ++c) {
    std::vector<float> v(2 + c % 300);
    for (float& x : v) x = g(rng);
    const auto once = normalize(EmbeddingVector(v));
    ASSERT_EQ(normalize(once), once) << "case " << c;
  }
}

TEST(Cosine, Examples) {
  const auto a = unit({1, 0});
  EXPECT_DOUBLE_EQ(cosine_sim(a, a), 1.0);
  EXPECT_DOUBLE_EQ(cosine_sim(a, unit({0, 1})), 0.0);
  EXPECT_NEAR(cosine_sim(a, unit({0.6f, 0.8f})), 0.6, 1e-7);
}

TEST(Cosine, DimMismatch) { EXPECT_CIR_ERROR(cosine_sim(unit({1, 0}), unit({1, 0, 0})), ErrorKind::DimMismatch); }

TEST(Slerp, EndpointsFollowTheWeightConvention) {
  const auto a = unit({1, 2, 3});
  const auto b = unit({-1, 0.5f, 2});
  EXPECT_EQ(slerp(a, b, 1.0), a);
  EXPECT_EQ(slerp(a, b, 0.0), b);
}

TEST(Slerp, OrthogonalMidpoint) {
  const auto m = slerp(unit({1, 0}), unit({0, 1}), 0.5);
  EXPECT_NEAR(m[0], std::sqrt(2.0) / 2.0, 1e-7);
  EXPECT_NEAR(m[1], std::sqrt(2.0) / 2.0, 1e-7);
}

TEST(Slerp, WeightOnFirstArgumentGrowsWithAlpha) {
  // alpha = 0.25 on orthogonal inputs: sin(pi/8) on a, cos(pi/8) on b.
  const auto m = slerp(unit({1, 0}), unit({0, 1}), 0.25);
  EXPECT_NEAR(m[0], std::sin(std::numbers::pi / 8), 1e-7);
  EXPECT_NEAR(m[1], std::cos(std::numbers::pi / 8), 1e-7);
}

TEST(Slerp, SelfInterpolationIsIdentity) {
  const auto a = unit({0.3f, -0.2f, 0.9f, 0.1f});
  for (double alpha : {0.0, 0.1, 0.5, 0.77, 1.0}) EXPECT_EQ(slerp(a, a, alpha), a);
}

TEST(Slerp, AntipodalRejected) {
  EXPECT_CIR_ERROR(slerp(unit({1, 0}), unit({-1, 0}), 0.5), ErrorKind::AntipodalVectors);
}

TEST(Slerp, AlphaOutOfRangeRejected) {
  EXPECT_CIR_ERROR(slerp(unit({1, 0}), unit({0, 1}), 1.5), ErrorKind::InvalidArgument);
  EXPECT_CIR_ERROR(slerp(unit({1, 0}), unit({0, 1}), -0.1), ErrorKind::InvalidArgument);
}

TEST(Slerp, NearParallelUsesStableFallback) {
  const auto a = unit({1, 0, 0});
  const auto b = unit({1, 1e-7f, 0});
  const auto m = slerp(a, b, 0.5);
  EXPECT_NEAR(l2_norm(m.values()), 1.0, 1e-6);
  EXPECT_LE(angle_between(m, a), angle_between(a, b) + 1e-7);
}

TEST(Angle, AccurateNearZero) {
  // acos(dot) would lose about half the digits here.
  const auto a = unit({1, 0});
  const auto b = unit({1, 1e-5f});
  EXPECT_NEAR(angle_between(a, b), 1e-5, 1e-10);
}

}  // namespace
}  // namespace cir
