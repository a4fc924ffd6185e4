#include "cir/oracle.hpp"
#include "test_util.hpp"

namespace cir {
namespace {

class OracleSuite : public ::testing::TestWithParam<std::string> {};

TEST_P(OracleSuite, Passes) {
  const auto r = oracle::run_suite(GetParam(), 20240611);
  for (const auto& f : r.failures) ADD_FAILURE() << f;
  EXPECT_TRUE(r.passed);
  EXPECT_GT(r.cases, 0u);
}

INSTANTIATE_TEST_SUITE_P(All, OracleSuite, ::testing::ValuesIn(oracle::suite_names()),
                         [](const auto& info) { return info.param; });

TEST(OracleReferences, SlerpReferenceEndpoints) {
  const auto a = test::unit({1, 0, 0});
  const auto b = test::unit({0, 1, 0});
  const auto at1 = oracle::slerp_reference(a.values(), b.values(), 1.0L);
  EXPECT_NEAR(static_cast<double>(at1[0]), 1.0, 1e-15);
  EXPECT_NEAR(static_cast<double>(at1[1]), 0.0, 1e-15);
}

TEST(OracleReferences, MapHandCase) {
  const std::vector<Ranking> r = {{"a", "x", "b", "y"}};
  const std::vector<IdSet> g = {{"a", "b"}};
  EXPECT_EQ(oracle::map_reference(r, g, 4), 5.0 / 6.0);
}

TEST(OracleReferences, UnknownSuite) { EXPECT_CIR_ERROR(oracle::run_suite("nope", 1), ErrorKind::InvalidArgument); }

}  // namespace
}  // namespace cir
