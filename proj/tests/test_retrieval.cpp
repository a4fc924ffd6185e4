#include <random>

#include "cir/kernels.hpp"
#include "cir/oracle.hpp"
#include "cir/random.hpp"
#include "cir/retrieval.hpp"
#include "test_util.hpp"

namespace cir {
namespace {

using test::unit;

RetrievalIndex make_index(std::vector<std::string> ids, const std::vector<UnitEmbedding>& rows) {
  return RetrievalIndex(std::move(ids), EmbeddingMatrix::from_rows(rows));
}

// Six items on the unit circle at increasing angle from the x axis.
RetrievalIndex fan_index() {
  std::vector<UnitEmbedding> rows;
  std::vector<std::string> ids;
  for (int i = 0; i < 6; ++i) {
    const double a = 0.2 * i;
    rows.push_back(unit({static_cast<float>(std::cos(a)), static_cast<float>(std::sin(a))}));
    ids.push_back(std::string(1, static_cast<char>('a' + i)));
  }
  return make_index(ids, rows);
}

TEST(Rank, ExactMatchFirstAndExclusion) {
  const auto index = fan_index();
  const auto q = index.embedding("c");
  const auto r = rank(index, q);
  EXPECT_EQ(r.front(), "c");
  EXPECT_EQ(r.size(), 6u);
  const auto without = rank(index, q, {"c"});
  EXPECT_EQ(without.front(), r[1]);
  EXPECT_EQ(without.size(), 5u);
}

TEST(Rank, TiesBreakById) {
  const auto index = make_index({"z", "m", "b"}, {unit({1, 0}), unit({0, 1}), unit({1, 0})});
  EXPECT_EQ(rank(index, unit({1, 0})), (Ranking{"b", "z", "m"}));
}

TEST(Rank, MatchesBruteForceOnRandomGallery) {
  Rng rng(3);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<UnitEmbedding> rows;
    std::vector<std::string> ids;
    for (int i = 0; i < 5; ++i) {
      std::vector<double> v(3);
      for (double& x : v) x = g(rng);
      rows.push_back(normalize_span(std::span<const double>(v)));
      ids.push_back("id" + std::to_string((i * 7) % 5));
    }
    const auto index = make_index(ids, rows);
    const auto q = rows[trial % 5];
    EXPECT_EQ(rank(index, q), oracle::rank_reference(ids, index.embeddings(), q.values(), {}));
  }
}

TEST(Rank, DimMismatchRejected) {
  EXPECT_CIR_ERROR(rank(fan_index(), unit({1, 0, 0})), ErrorKind::DimMismatch);
}

TEST(Recall, Examples) {
  const std::vector<Ranking> first = {{"a", "b"}, {"c", "d"}};
  const std::vector<IdSet> gts = {{"a"}, {"c"}};
  EXPECT_EQ(recall_at_k(first, gts, 1), 1.0);
  const std::vector<Ranking> second = {{"x", "g", "y"}};
  const std::vector<IdSet> gt = {{"g"}};
  EXPECT_EQ(recall_at_k(second, gt, 1), 0.0);
  EXPECT_EQ(recall_at_k(second, gt, 3), 1.0);
  EXPECT_EQ(recall_at_k(second, gt, 100), 1.0);
  EXPECT_CIR_ERROR(recall_at_k(std::span<const Ranking>{}, std::span<const IdSet>{}, 1), ErrorKind::EmptyQuerySet);
  EXPECT_CIR_ERROR(recall_at_k(second, gt, 0), ErrorKind::InvalidArgument);
}

TEST(AveragePrecision, Examples) {
  EXPECT_EQ(average_precision_at_k({"a", "x"}, {"a"}, 5), 1.0);
  EXPECT_EQ(average_precision_at_k({"a", "x", "b", "y"}, {"a", "b"}, 4), 5.0 / 6.0);
  EXPECT_EQ(average_precision_at_k({"x", "y", "a"}, {"a"}, 2), 0.0);
  // Normalized by min(k, |GT|): one of three relevant items found at rank 1 with k = 1.
  EXPECT_EQ(average_precision_at_k({"a", "b", "c"}, {"a", "b", "c"}, 1), 1.0);
  const std::vector<Ranking> rs = {{"a", "x", "b", "y"}, {"q"}};
  const std::vector<IdSet> gs = {{"a", "b"}, {"q"}};
  EXPECT_EQ(map_at_k(rs, gs, 4), static_cast<double>((5.0L / 6.0L + 1.0L) / 2.0L));
}

TEST(RecallSubset, Examples) {
  const auto index = fan_index();
  auto run = [&](std::vector<std::string> subset, const std::string& target, std::size_t k) {
    QueryRecord q{"q", std::nullopt, std::string("t"), {target}, subset};
    const std::vector<QueryRecord> qs = {q};
    const std::vector<UnitEmbedding> composed = {index.embedding("a")};
    return recall_subset_at_k(index, qs, composed, k);
  };
  EXPECT_EQ(run({"b", "c"}, "b", 1), 1.0);
  EXPECT_EQ(run({"b", "c"}, "c", 1), 0.0);
  EXPECT_EQ(run({"e"}, "e", 1), 1.0);
  EXPECT_EQ(run({"a", "b", "c", "d", "e", "f"}, "c", 2), 0.0);
  EXPECT_EQ(run({"a", "b", "c", "d", "e", "f"}, "c", 3), 1.0);
}

TEST(RecallSubset, MissingSubsetRejected) {
  const auto index = fan_index();
  const std::vector<QueryRecord> qs = {{"q", std::nullopt, std::string("t"), {"b"}, std::nullopt}};
  const std::vector<UnitEmbedding> composed = {index.embedding("a")};
  EXPECT_CIR_ERROR(recall_subset_at_k(index, qs, composed, 1), ErrorKind::MissingSubset);
}

TEST(Evaluate, ComposedReport) {
  const auto index = fan_index();
  const std::vector<QueryRecord> qs = {
      {"q1", std::string("a"), std::string("rotate"), {"b"}, std::nullopt},
      {"q2", std::string("f"), std::string("rotate"), {"a"}, std::nullopt},
  };
  // q1 composes onto a itself; a is excluded as the reference so b ranks first.
  const std::vector<UnitEmbedding> composed = {index.embedding("a"), index.embedding("f")};
  const std::vector<std::size_t> ks = {1, 5};
  const auto report = evaluate_composed(qs, composed, index, ks);
  EXPECT_EQ(report.num_queries, 2u);
  EXPECT_EQ(report.recall_at.at(1), 0.5);
  EXPECT_EQ(report.recall_at.at(5), 1.0);
  EXPECT_FALSE(report.recall_subset_at.has_value());
  EXPECT_EQ(report.recall_sum(), 1.5);
  EXPECT_CIR_ERROR(evaluate_composed({}, {}, index, ks), ErrorKind::EmptyQuerySet);
}

TEST(Evaluate, QueryValidation) {
  const auto index = fan_index();
  EXPECT_CIR_ERROR(validate_query({"q", std::string("a"), std::nullopt, {"a"}, std::nullopt}, index),
                   ErrorKind::InvalidArgument);
  EXPECT_CIR_ERROR(validate_query({"q", std::string("zz"), std::nullopt, {"a"}, std::nullopt}, index),
                   ErrorKind::UnknownId);
  EXPECT_CIR_ERROR(validate_query({"q", std::nullopt, std::nullopt, {"a"}, std::nullopt}, index),
                   ErrorKind::EmptyQuery);
}

EmbeddingMatrix random_matrix(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g;
  std::vector<UnitEmbedding> out;
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<double> v(dim);
    for (double& x : v) x = g(rng);
    out.push_back(normalize_span(std::span<const double>(v)));
  }
  return EmbeddingMatrix::from_rows(out);
}

TEST(Kernels, ParallelMatchesSerial) {
  const auto a = random_matrix(257, 33, 1);
  const auto b = random_matrix(131, 33, 2);
  const auto q = a.row(5);
  EXPECT_EQ(kernels::scores(a, q), kernels::serial::scores(a, q));
  const auto g = kernels::gram(a, b);
  EXPECT_EQ(g, kernels::serial::gram(a, b));
  const auto sq = kernels::gram(a, a);
  EXPECT_EQ(kernels::argmax_off_diagonal(sq, a.rows()), kernels::serial::argmax_off_diagonal(sq, a.rows()));
}

TEST(Kernels, Errors) {
  const auto a = random_matrix(4, 3, 1);
  const auto b = random_matrix(4, 5, 2);
  EXPECT_CIR_ERROR(kernels::gram(a, b), ErrorKind::DimMismatch);
  const std::vector<double> one = {1.0};
  EXPECT_CIR_ERROR(kernels::argmax_off_diagonal(one, 1), ErrorKind::BatchTooSmall);
}

}  // namespace
}  // namespace cir
