#include <fstream>

#include "cir/config.hpp"
#include "cir/embedding_io.hpp"
#include "cir/records.hpp"
#include "cir/synthetic.hpp"
#include "test_util.hpp"

namespace cir {
namespace {

TEST(EmbeddingFile, RoundTripAndHeader) {
  const auto dir = test::scratch_dir("embedding_file");
  EmbeddingMatrix m(0, 3);
  m.append(std::vector<float>{1.0f, -2.5f, 0.125f});
  m.append(std::vector<float>{0.0f, 3.0f, 1e-20f});
  write_embeddings(dir / "m.cirf", m);
  const auto back = read_embeddings(dir / "m.cirf");
  EXPECT_EQ(back.rows(), 2u);
  EXPECT_EQ(back.dim(), 3u);
  EXPECT_TRUE(std::equal(back.data().begin(), back.data().end(), m.data().begin()));
  // magic(4) + version(2) + count(8) + dim(4) + payload
  EXPECT_EQ(std::filesystem::file_size(dir / "m.cirf"), 18u + 2 * 3 * 4);
  std::ifstream is(dir / "m.cirf", std::ios::binary);
  char magic[4];
  is.read(magic, 4);
  EXPECT_EQ(std::string(magic, 4), "CIRF");
}

TEST(EmbeddingFile, CorruptInputsRejected) {
  const auto dir = test::scratch_dir("embedding_corrupt");
  {
    std::ofstream os(dir / "bad.cirf", std::ios::binary);
    os << "NOPE0000000000000000";
  }
  EXPECT_CIR_ERROR(read_embeddings(dir / "bad.cirf"), ErrorKind::Format);
  EmbeddingMatrix m(0, 2);
  m.append(std::vector<float>{1.0f, 0.0f});
  write_embeddings(dir / "ok.cirf", m);
  std::filesystem::resize_file(dir / "ok.cirf", std::filesystem::file_size(dir / "ok.cirf") - 2);
  EXPECT_CIR_ERROR(read_embeddings(dir / "ok.cirf"), ErrorKind::Format);
  EXPECT_CIR_ERROR(read_embeddings(dir / "absent.cirf"), ErrorKind::Io);
}

TEST(EmbeddingTable, RoundTripWithSiblingIds) {
  const auto dir = test::scratch_dir("table");
  const auto corpus = synthetic::make_corpus({});
  write_table(dir / "items.cirf", corpus.table);
  EXPECT_TRUE(std::filesystem::exists(sibling_jsonl(dir / "items.cirf")));
  const auto back = read_table(dir / "items.cirf");
  ASSERT_EQ(back.size(), corpus.table.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back.items()[i].id, corpus.table.items()[i].id);
    EXPECT_EQ(back.items()[i].caption, corpus.table.items()[i].caption);
    EXPECT_EQ(back.embedding(i), corpus.table.embedding(i));
  }
  EXPECT_CIR_ERROR(back.at("missing"), ErrorKind::UnknownId);
}

TEST(EmbeddingTable, DuplicateIdsRejected) {
  EmbeddingMatrix m(0, 2);
  m.append(std::vector<float>{1.0f, 0.0f});
  m.append(std::vector<float>{0.0f, 1.0f});
  EXPECT_CIR_ERROR(EmbeddingTable({{"a", "x", ""}, {"a", "y", ""}}, m), ErrorKind::Format);
}

TEST(Jsonl, ErrorsCarryLineNumbers) {
  const auto dir = test::scratch_dir("jsonl");
  {
    std::ofstream os(dir / "x.jsonl");
    os << "{\"a\": 1}\n\n{broken\n";
  }
  try {
    read_jsonl(dir / "x.jsonl");
    ADD_FAILURE() << "no throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Format);
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
}

TEST(Records, QueryRoundTrip) {
  QueryRecord q{"q1", std::string("ref"), std::string("add a hat"), {"g1", "g2"}, std::vector<std::string>{"g1", "s"}};
  const auto back = query_from_json(to_json(q));
  EXPECT_EQ(back.query_id, q.query_id);
  EXPECT_EQ(back.reference_id, q.reference_id);
  EXPECT_EQ(back.text, q.text);
  EXPECT_EQ(back.ground_truth_ids, q.ground_truth_ids);
  EXPECT_EQ(back.subset_ids, q.subset_ids);
  EXPECT_CIR_ERROR(query_from_json(nlohmann::json{{"query_id", "x"}}), ErrorKind::Format);
}

TEST(Records, BenchmarkAndGroups) {
  const auto dir = test::scratch_dir("records");
  const BenchmarkTriplet t{"a", "b", "make it red"};
  write_jsonl(dir / "b.jsonl", {to_json(t)});
  EXPECT_EQ(read_benchmark(dir / "b.jsonl"), std::vector<BenchmarkTriplet>{t});
  const PairGroup g{{"s", "m1", "m2"}, {1.0, 0.8, 0.6}};
  const auto back = group_from_json(to_json(g));
  EXPECT_EQ(back.member_ids, g.member_ids);
  EXPECT_EQ(back.seed_similarity, g.seed_similarity);
  EXPECT_CIR_ERROR(group_from_json(nlohmann::json{{"members", {"s"}}, {"similarities", {1.0}}}), ErrorKind::Format);
}

TEST(Records, MetricReportNotesUnreliableSubsetRecall) {
  MetricReport r;
  r.num_queries = 2;
  r.recall_at = {{1, 0.5}, {5, 1.0}};
  r.map_at = {{1, 0.5}};
  auto j = to_json(r);
  EXPECT_EQ(j["recall_sum"].get<double>(), 1.5);
  EXPECT_TRUE(j["recall_subset_at"].is_null());
  EXPECT_FALSE(j.contains("recall_subset_note"));
  r.recall_subset_at = std::map<std::size_t, double>{{1, 1.0}};
  j = to_json(r);
  EXPECT_EQ(j["recall_sum"].get<double>(), 2.5);
  EXPECT_TRUE(j.contains("recall_subset_note"));
}

TEST(Config, DefaultsAndOverrides) {
  const auto cfg = parse_config(nlohmann::json::parse(R"({
    "seed": 9, "synth": {"alpha": 0.7, "neighbor_mode": "random"},
    "model": {"hidden_dim": 32}, "train": {"steps": 10, "mode": "triplet"},
    "eval": {"ks": [1, 3]}, "pair": {"interval": 0.05}, "refine": {"concurrency": 2}})"));
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.synth.alpha, 0.7);
  EXPECT_EQ(cfg.synth.neighbor_mode, NeighborMode::Random);
  EXPECT_EQ(cfg.synth.text_synthesis_ratio, 0.75);
  EXPECT_EQ(cfg.model.hidden_dim, 32u);
  EXPECT_EQ(cfg.train.steps, 10u);
  EXPECT_EQ(cfg.train_mode, TrainMode::Triplet);
  EXPECT_EQ(cfg.eval_ks, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(cfg.pair.interval, 0.05);
  EXPECT_EQ(cfg.refine.concurrency, 2u);
  const auto defaults = parse_config(nlohmann::json::object());
  EXPECT_EQ(defaults.synth.alpha, 0.5);
  EXPECT_EQ(defaults.model.tau, 0.07);
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_CIR_ERROR(parse_config(nlohmann::json::parse(R"({"synth": {"alpah": 0.5}})")), ErrorKind::Format);
  EXPECT_CIR_ERROR(parse_config(nlohmann::json::parse(R"({"trian": {}})")), ErrorKind::Format);
  EXPECT_CIR_ERROR(parse_config(nlohmann::json::parse(R"({"synth": {"neighbor_mode": "far"}})")), ErrorKind::Format);
}

TEST(Config, RoundTripAndReferenceListsEveryKey) {
  RunConfig cfg;
  cfg.seed = 4;
  cfg.synth.alpha = 0.25;
  const auto back = parse_config(to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
  const auto ref = config_reference();
  for (const auto& key : config_keys()) EXPECT_NE(ref.find(key.name), std::string::npos) << key.name;
}

TEST(Config, BundledExampleParses) {
  const auto cfg = load_config(CIR_DATA_DIR "/config.json");
  EXPECT_EQ(cfg.train_mode, TrainMode::Triplet);
  EXPECT_TRUE(std::filesystem::exists(cfg.train_items));
}

}  // namespace
}  // namespace cir
