// cir: single entry point for synthesis, training, evaluation, dataset
// construction and benchmark refinement.
//
// Exit codes: 0 success, 1 usage error, 2 data error (including a failed
// oracle suite), 3 judge error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cir/checkpoint.hpp"
#include "cir/config.hpp"
#include "cir/error.hpp"
#include "cir/judge_http.hpp"
#include "cir/oracle.hpp"
#include "cir/pairing.hpp"
#include "cir/records.hpp"
#include "cir/refinement.hpp"
#include "cir/retrieval.hpp"
#include "cir/synthesis.hpp"
#include "cir/synthetic.hpp"
#include "cir/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitJudge = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Options shared by every subcommand.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;

  cir::RunConfig load() const {
    cir::RunConfig cfg = config_path.empty() ? cir::parse_config(json::object()) : cir::load_config(config_path);
    if (seed) {
      cfg.seed = *seed;
      cfg.train.seed = *seed;
      cfg.refine.seed = *seed;
    }
    return cfg;
  }
};

void add_common(CLI::App* sub, Common& common) {
  sub->add_option("--config", common.config_path, "JSON run configuration");
  sub->add_option("--seed", common.seed, "global seed (overrides the config)");
  sub->footer(cir::config_reference());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc | std::ios::binary);
  if (!os) throw cir::Error(cir::ErrorKind::Io, "cannot write " + path.string());
  os << text;
}

std::vector<std::size_t> parse_ks(const std::string& list) {
  std::vector<std::size_t> ks;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      ks.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw UsageError("--k expects a comma-separated list of positive integers, got '" + list + "'");
    }
  }
  if (ks.empty()) throw UsageError("--k is empty");
  return ks;
}

// ---- pair ------------------------------------------------------------------------

struct PairArgs {
  Common common;
  std::string embeddings;
  std::string out;
  std::optional<double> low, high, interval;
  std::optional<std::size_t> group_size;
};

int run_pair(const PairArgs& a) {
  auto cfg = a.common.load();
  if (a.low) cfg.pair.low = *a.low;
  if (a.high) cfg.pair.high = *a.high;
  if (a.interval) cfg.pair.interval = *a.interval;
  if (a.group_size) cfg.pair.group_size = *a.group_size;
  const auto table = cir::read_table(a.embeddings);
  const auto groups = cir::build_groups(table, cfg.pair);
  std::vector<json> lines;
  std::size_t pairs = 0;
  for (const auto& g : groups) {
    lines.push_back(cir::to_json(g));
    pairs += cir::pairs_from_group(g).size();
  }
  cir::write_jsonl(a.out, lines);
  std::cerr << "pair: " << groups.size() << " groups, " << pairs << " pairs from " << table.size() << " images\n";
  return kExitOk;
}

// ---- synth -----------------------------------------------------------------------

struct SynthArgs {
  Common common;
  std::string items;
  std::string out;
  std::optional<std::size_t> batch_size;
  std::size_t epochs = 1;
};

int run_synth(const SynthArgs& a) {
  auto cfg = a.common.load();
  const std::size_t batch = a.batch_size.value_or(cfg.train.batch_size);
  if (batch < 2) throw UsageError("--batch-size must be at least 2");
  const auto table = cir::read_table(a.items);
  const auto items = cir::captioned_items(table);
  if (items.size() < 2) throw cir::Error(cir::ErrorKind::BatchTooSmall, "need at least two items");

  std::vector<json> lines;
  std::uint64_t batch_index = 0;
  for (std::size_t epoch = 0; epoch < a.epochs; ++epoch) {
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), 0);
    cir::Rng shuffle_rng(cir::mix_seed(cfg.seed, 0x5e00 + epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::size_t start = 0;
    while (start < order.size()) {
      std::size_t end = std::min(order.size(), start + batch);
      // A trailing singleton joins the previous batch.
      if (order.size() - end == 1) end = order.size();
      std::vector<cir::CaptionedItem> chunk;
      for (std::size_t i = start; i < end; ++i) chunk.push_back(items[order[i]]);
      cir::Rng rng(cir::mix_seed(cfg.seed, batch_index++));
      for (const auto& t : cir::synthesize_batch(chunk, cfg.synth, rng)) lines.push_back(cir::to_json(t));
      start = end;
    }
  }
  cir::write_jsonl(a.out, lines);
  std::cerr << "synth: " << lines.size() << " triplets\n";
  return kExitOk;
}

// ---- train -----------------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string out;
  std::string items;
  std::string triplets;
  std::string mode;
  std::optional<std::size_t> steps;
};

int run_train(const TrainArgs& a) {
  auto cfg = a.common.load();
  if (!a.items.empty()) cfg.train_items = a.items;
  if (!a.triplets.empty()) cfg.train_triplets = a.triplets;
  if (!a.mode.empty()) cfg.train_mode = a.mode == "triplet" ? cir::TrainMode::Triplet : cir::TrainMode::Pretrain;
  if (a.steps) cfg.train.steps = *a.steps;
  if (cfg.train_items.empty()) throw UsageError("train needs train.items in the config or --items");

  const auto table = cir::read_table(cfg.train_items);
  cir::TrainResult result;
  if (cfg.train_mode == cir::TrainMode::Triplet) {
    if (cfg.train_triplets.empty()) throw UsageError("triplet mode needs train.triplets or --triplets");
    const auto samples = cir::read_training_triplets(cfg.train_triplets, table);
    result = cir::train_triplets(samples, cfg.model, cfg.train);
  } else {
    const auto items = cir::captioned_items(table);
    result = cir::train_pretrain(items, cfg.model, cfg.train);
  }
  cir::save_checkpoint(a.out, result.params, {cfg.seed, cfg.train.steps, result.losses});
  if (!result.losses.empty()) {
    std::fprintf(stderr, "train: %zu steps, loss %.6f -> %.6f\n", result.losses.size(), result.losses.front(),
                 result.losses.back());
  }
  return kExitOk;
}

// ---- eval ------------------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::string index;
  std::string queries;
  std::string ckpt;
  std::string ks;
  std::string out;
};

int run_eval(const EvalArgs& a) {
  auto cfg = a.common.load();
  const auto ks = a.ks.empty() ? cfg.eval_ks : parse_ks(a.ks);
  const auto table = cir::read_table(a.index);
  const auto index = cir::RetrievalIndex::from_table(table);
  const auto queries = cir::read_queries(a.queries);
  const auto ckpt = cir::load_checkpoint(a.ckpt);
  const auto report = cir::evaluate(ckpt.params, queries, index, ks);
  json doc = cir::to_json(report);
  doc["config"] = {{"index", a.index},
                   {"queries", a.queries},
                   {"checkpoint", a.ckpt},
                   {"ks", ks},
                   {"checkpoint_seed", ckpt.info.seed},
                   {"checkpoint_step", ckpt.info.step}};
  const std::string text = doc.dump(2) + "\n";
  if (!a.out.empty()) write_text(a.out, text);
  std::cout << text;
  return kExitOk;
}

// ---- build-dataset ---------------------------------------------------------------

struct BuildArgs {
  Common common;
  std::string groups;
  std::string responses;
  std::string out;
  std::string audit;
  std::string embeddings;
  std::string prompts;
  std::vector<std::string> keywords;
  bool no_filter = false;
};

int run_build(const BuildArgs& a) {
  a.common.load();  // validates the config even though only defaults are used here
  std::vector<cir::PairGroup> groups;
  for (const auto& j : cir::read_jsonl(a.groups)) groups.push_back(cir::group_from_json(j));

  std::optional<cir::EmbeddingTable> table;
  if (!a.embeddings.empty()) table = cir::read_table(a.embeddings);
  if (!a.prompts.empty() && !table) throw UsageError("--prompts needs --embeddings for the captions");

  std::vector<json> kept_lines;
  std::vector<json> audit_lines;
  std::vector<json> prompt_lines;
  std::size_t missing = 0;
  std::size_t malformed = 0;
  const auto keywords = a.keywords.empty() ? cir::kDefaultBiometricKeywords : a.keywords;
  for (const auto& g : groups) {
    for (const auto& [ref, tgt] : cir::pairs_from_group(g)) {
      if (!a.prompts.empty()) {
        auto caption = [&](const std::string& id) {
          const auto& item = table->items()[table->at(id)];
          return item.detailed_caption.empty() ? item.caption : item.detailed_caption;
        };
        prompt_lines.push_back({{"ref_id", ref},
                                {"tgt_id", tgt},
                                {"system", cir::kGenerationSystemPrompt},
                                {"prompt", cir::assemble_generation_prompt(caption(ref), caption(tgt),
                                                                           cir::default_category_definitions(),
                                                                           cir::default_category_examples(), {})}});
      }
      if (a.responses.empty()) continue;
      const fs::path file = fs::path(a.responses) / (ref + "__" + tgt + ".json");
      if (!fs::exists(file)) {
        ++missing;
        continue;
      }
      std::ifstream is(file);
      std::stringstream raw;
      raw << is.rdbuf();
      cir::ParsedResponse parsed;
      try {
        parsed = cir::parse_generation_response(raw.str(), ref, tgt);
      } catch (const cir::Error& e) {
        if (e.kind() != cir::ErrorKind::MalformedResponse) throw;
        ++malformed;
        audit_lines.push_back({{"ref_id", ref}, {"tgt_id", tgt}, {"reason", "malformed_response"}, {"detail", e.what()}});
        continue;
      }
      for (const auto& rej : parsed.rejected) {
        audit_lines.push_back({{"ref_id", ref},
                               {"tgt_id", tgt},
                               {"direction", std::string(cir::to_string(rej.direction))},
                               {"position", rej.position},
                               {"reason", cir::to_string(rej.reason)},
                               {"detail", rej.detail}});
      }
      if (a.no_filter) {
        for (const auto& r : parsed.records) kept_lines.push_back(cir::to_json(r));
        continue;
      }
      const auto filtered = cir::biometric_filter(parsed.records, keywords);
      for (const auto& r : filtered.kept) kept_lines.push_back(cir::to_json(r));
      for (const auto& r : filtered.removed) {
        json j = cir::to_json(r);
        j["reason"] = "biometric_keyword";
        audit_lines.push_back(j);
      }
    }
  }
  if (!a.out.empty()) cir::write_jsonl(a.out, kept_lines);
  if (!a.audit.empty()) cir::write_jsonl(a.audit, audit_lines);
  if (!a.prompts.empty()) cir::write_jsonl(a.prompts, prompt_lines);
  std::cerr << "build-dataset: " << kept_lines.size() << " texts kept, " << audit_lines.size() << " audited, "
            << missing << " pairs without a response, " << malformed << " malformed responses\n";
  return kExitOk;
}

// ---- refine ----------------------------------------------------------------------

struct RefineArgs {
  Common common;
  std::string benchmark;
  std::string index;
  std::string judge;
  std::string out;
  std::string stats;
  std::string audit;
  std::optional<std::size_t> concurrency;
};

int run_refine(const RefineArgs& a) {
  auto cfg = a.common.load();
  if (a.concurrency) cfg.refine.concurrency = *a.concurrency;
  const auto triplets = cir::read_benchmark(a.benchmark);
  const auto index = cir::RetrievalIndex::from_table(cir::read_table(a.index));

  std::unique_ptr<cir::JudgeClient> judge;
  if (a.judge.rfind("mock:", 0) == 0) {
    auto mock = std::make_unique<cir::MockJudge>(cir::MockJudge::from_file(a.judge.substr(5)));
    mock->register_targets(triplets);
    judge = std::move(mock);
  } else if (a.judge.rfind("http:", 0) == 0 || a.judge.rfind("https:", 0) == 0) {
    // Both http:<url> and a bare URL are accepted.
    std::string url = a.judge;
    if (url.rfind("http:http", 0) == 0) url = url.substr(5);
    judge = std::make_unique<cir::HttpJudge>(url, cfg.judge);
  } else {
    throw UsageError("--judge must be mock:<fixture> or http:<url>");
  }

  const auto result = cir::refine(triplets, index, *judge, cfg.refine);
  std::vector<json> refined;
  for (const auto& t : result.refined()) refined.push_back(cir::to_json(t));
  cir::write_jsonl(a.out, refined);
  const json stats = cir::to_json(result.stats);
  if (!a.stats.empty()) write_text(a.stats, stats.dump(2) + "\n");
  if (!a.audit.empty()) {
    std::vector<json> audit;
    for (const auto& r : result.records) audit.push_back(cir::to_json(r));
    cir::write_jsonl(a.audit, audit);
  }
  std::cout << stats.dump() << "\n";
  return kExitOk;
}

// ---- oracle ----------------------------------------------------------------------

int run_oracle(const std::string& suite, std::uint64_t seed) {
  std::vector<std::string> names;
  if (suite == "all") {
    names = cir::oracle::suite_names();
  } else if (std::find(cir::oracle::suite_names().begin(), cir::oracle::suite_names().end(), suite) !=
             cir::oracle::suite_names().end()) {
    names = {suite};
  } else {
    throw UsageError("unknown oracle suite '" + suite + "'");
  }
  bool ok = true;
  for (const auto& name : names) {
    const auto r = cir::oracle::run_suite(name, seed);
    std::printf("%s %s cases=%zu time=%.3fs\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.cases, r.seconds);
    for (const auto& [k, v] : r.measures) std::printf("  %s = %.6g\n", k.c_str(), v);
    for (const auto& f : r.failures) std::printf("  failure: %s\n", f.c_str());
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitData;
}

// ---- fixture ---------------------------------------------------------------------

int run_fixture(const std::string& dir, std::uint64_t seed) {
  fs::create_directories(dir);
  cir::synthetic::CorpusConfig cc;
  cc.seed = seed;
  const auto corpus = cir::synthetic::make_corpus(cc);
  const fs::path root(dir);
  cir::write_table(root / "items.cirf", corpus.table);

  std::vector<json> queries;
  std::vector<json> triplets;
  std::vector<json> benchmark;
  for (const auto& q : corpus.queries) {
    queries.push_back(cir::to_json(q));
    const auto& target = *q.ground_truth_ids.begin();
    const auto ref = corpus.table.embedding(corpus.table.at(*q.reference_id));
    triplets.push_back({{"reference", std::vector<float>(ref.values().begin(), ref.values().end())},
                        {"text", *q.text},
                        {"target_id", target},
                        {"neighbor_id", *q.reference_id},
                        {"template_id", nullptr},
                        {"synthesized", false}});
    benchmark.push_back(cir::to_json(cir::BenchmarkTriplet{*q.reference_id, target, *q.text}));
  }
  cir::write_jsonl(root / "queries.jsonl", queries);
  cir::write_jsonl(root / "train_triplets.jsonl", triplets);
  cir::write_jsonl(root / "benchmark.jsonl", benchmark);
  std::cerr << "fixture: " << corpus.table.size() << " items, " << queries.size() << " queries in " << dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Composed image retrieval toolkit"};
  app.footer(cir::config_reference());
  app.require_subcommand(0, 1);

  PairArgs pair;
  auto* pair_cmd = app.add_subcommand("pair", "group similar images and emit pairs");
  add_common(pair_cmd, pair.common);
  pair_cmd->add_option("--embeddings", pair.embeddings, "embedding file (ids in sibling .jsonl)")->required();
  pair_cmd->add_option("--out", pair.out, "groups JSONL")->required();
  pair_cmd->add_option("--low", pair.low, "minimum similarity to the seed");
  pair_cmd->add_option("--high", pair.high, "maximum similarity to the seed");
  pair_cmd->add_option("--interval", pair.interval, "minimum spacing between member similarities");
  pair_cmd->add_option("--group-size", pair.group_size, "members per group");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "synthesize training triplets from image-caption pairs");
  add_common(synth_cmd, synth.common);
  synth_cmd->add_option("--items", synth.items, "embedding file with captions")->required();
  synth_cmd->add_option("--out", synth.out, "triplet JSONL")->required();
  synth_cmd->add_option("--batch-size", synth.batch_size, "in-batch neighbourhood size (default train.batch_size)");
  synth_cmd->add_option("--epochs", synth.epochs, "passes over the items")->check(CLI::PositiveNumber);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train the composer");
  add_common(train_cmd, train.common);
  train_cmd->add_option("--out", train.out, "checkpoint manifest path")->required();
  train_cmd->add_option("--items", train.items, "overrides train.items");
  train_cmd->add_option("--triplets", train.triplets, "overrides train.triplets");
  train_cmd->add_option("--mode", train.mode, "overrides train.mode")->check(CLI::IsMember({"pretrain", "triplet"}));
  train_cmd->add_option("--steps", train.steps, "overrides train.steps");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on composed queries");
  add_common(eval_cmd, eval.common);
  eval_cmd->add_option("--index", eval.index, "gallery embedding file")->required();
  eval_cmd->add_option("--queries", eval.queries, "query JSONL")->required();
  eval_cmd->add_option("--ckpt", eval.ckpt, "checkpoint manifest")->required();
  eval_cmd->add_option("--k", eval.ks, "comma-separated cutoffs (default eval.ks)");
  eval_cmd->add_option("--out", eval.out, "also write the report here");

  BuildArgs build;
  auto* build_cmd = app.add_subcommand("build-dataset", "parse generated modification texts into a dataset");
  add_common(build_cmd, build.common);
  build_cmd->add_option("--groups", build.groups, "groups JSONL from `pair`")->required();
  build_cmd->add_option("--responses", build.responses, "directory of <ref>__<tgt>.json generator replies");
  build_cmd->add_option("--out", build.out, "dataset JSONL");
  build_cmd->add_option("--audit", build.audit, "rejected and filtered entries");
  build_cmd->add_option("--embeddings", build.embeddings, "embedding file, for captions in prompts");
  build_cmd->add_option("--prompts", build.prompts, "write one generation prompt per pair");
  build_cmd->add_option("--keywords", build.keywords, "biometric filter keywords")->delimiter(',');
  build_cmd->add_flag("--no-filter", build.no_filter, "skip the biometric keyword filter");

  RefineArgs refine_args;
  auto* refine_cmd = app.add_subcommand("refine", "validate and regenerate benchmark triplets with a judge");
  add_common(refine_cmd, refine_args.common);
  refine_cmd->add_option("--benchmark", refine_args.benchmark, "benchmark JSONL")->required();
  refine_cmd->add_option("--index", refine_args.index, "embedding file for hard negatives")->required();
  refine_cmd->add_option("--judge", refine_args.judge, "mock:<fixture.json> or http:<url>")->required();
  refine_cmd->add_option("--out", refine_args.out, "refined benchmark JSONL")->required();
  refine_cmd->add_option("--stats", refine_args.stats, "statistics JSON");
  refine_cmd->add_option("--audit", refine_args.audit, "per-triplet records with round logs");
  refine_cmd->add_option("--concurrency", refine_args.concurrency, "overrides refine.concurrency");

  std::string suite = "all";
  Common oracle_common;
  auto* oracle_cmd = app.add_subcommand("oracle", "run brute-force oracle suites");
  add_common(oracle_cmd, oracle_common);
  std::string suite_help = "suite: all";
  for (const auto& n : cir::oracle::suite_names()) suite_help += " | " + n;
  oracle_cmd->add_option("suite", suite, suite_help);

  std::string fixture_dir;
  Common fixture_common;
  auto* fixture_cmd = app.add_subcommand("fixture", "write the bundled synthetic corpus");
  add_common(fixture_cmd, fixture_common);
  fixture_cmd->add_option("--out", fixture_dir, "output directory")->required();

  if (argc < 2) {
    std::cerr << app.help();
    return kExitUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*pair_cmd) return run_pair(pair);
    if (*synth_cmd) return run_synth(synth);
    if (*train_cmd) return run_train(train);
    if (*eval_cmd) return run_eval(eval);
    if (*build_cmd) return run_build(build);
    if (*refine_cmd) return run_refine(refine_args);
    if (*oracle_cmd) return run_oracle(suite, oracle_common.load().seed);
    if (*fixture_cmd) return run_fixture(fixture_dir, fixture_common.seed.value_or(7));
    std::cerr << app.help();
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const cir::Error& e) {
    std::cerr << "error [" << cir::to_string(e.kind()) << "]: " << e.what() << "\n";
    return e.kind() == cir::ErrorKind::JudgeError ? kExitJudge : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
