// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Tolerances and budgets are pinned here; the oracle suites carry their own
// per-case tolerances.
#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cir/oracle.hpp"
#include "cir/retrieval.hpp"
#include "cir/synthetic.hpp"
#include "cir/train.hpp"

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kSeed = 20240611;
constexpr double kSlerpBudgetSeconds = 1.0;
constexpr double kGradientBudgetSeconds = 30.0;
constexpr double kOverfitBudgetSeconds = 60.0;
constexpr std::size_t kOverfitMaxSteps = 500;
constexpr double kOverfitMinRecall = 0.95;
constexpr std::size_t kLossWindow = 50;
constexpr std::size_t kMetricGalleries = 1000;
constexpr std::size_t kSynthesisSamples = 10000;
constexpr std::uint64_t kAblationSeeds[] = {1, 2, 3};

struct Verdict {
  bool pass = false;
  std::string detail;
};

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double x, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << x;
  return os.str();
}

std::string first_failure(const cir::oracle::SuiteResult& r) {
  return r.failures.empty() ? std::string() : "; first failure: " + r.failures.front();
}

constexpr double kNoBudget = 0.0;

Verdict suite_verdict(const cir::oracle::SuiteResult& r, double budget_seconds, const std::string& extra) {
  Verdict v;
  v.pass = r.passed && (budget_seconds == kNoBudget || r.seconds < budget_seconds);
  v.detail = std::to_string(r.cases) + " cases in " + num(r.seconds, 3) + " s" +
             (budget_seconds == kNoBudget ? "" : " (budget " + num(budget_seconds) + " s)") + extra + first_failure(r);
  return v;
}

Verdict slerp_criterion() {
  const auto r = cir::oracle::slerp_suite(kSeed, 1000);
  return suite_verdict(r, kSlerpBudgetSeconds,
                       ", max norm err " + num(r.measures.at("max_norm_error")) + ", max angle err " +
                           num(r.measures.at("max_angle_error")));
}

Verdict gradient_criterion() {
  const auto r = cir::oracle::gradient_suite(kSeed, {});
  return suite_verdict(r, kGradientBudgetSeconds,
                       ", max rel err " + num(r.measures.at("max_relative_error")) + " (tau " +
                           num(r.measures.at("max_tau_relative_error")) + ")");
}

Verdict overfit_criterion() {
  const auto t0 = Clock::now();
  cir::synthetic::CorpusConfig cc;
  cc.dim = 16;
  const auto corpus = cir::synthetic::make_corpus(cc);
  cir::ModelConfig model;
  cir::TrainConfig cfg;
  cfg.steps = kOverfitMaxSteps;
  cfg.seed = 1;
  const auto result = cir::train_triplets(corpus.triplets, model, cfg);
  const auto index = cir::RetrievalIndex::from_table(corpus.table);
  const std::vector<std::size_t> ks = {1};
  const auto report = cir::evaluate(result.params, corpus.queries, index, ks);
  const double secs = since(t0);

  // Mean loss per consecutive 50-step window must never increase.
  std::vector<double> windows;
  for (std::size_t w = 0; w + kLossWindow <= result.losses.size(); w += kLossWindow) {
    double s = 0.0;
    for (std::size_t i = w; i < w + kLossWindow; ++i) s += result.losses[i];
    windows.push_back(s / static_cast<double>(kLossWindow));
  }
  bool monotone = true;
  for (std::size_t i = 1; i < windows.size(); ++i) monotone = monotone && windows[i] <= windows[i - 1];

  const double r1 = report.recall_at.at(1);
  Verdict v;
  v.pass = corpus.items.size() == 64 && result.params.dims.output_dim == 16 && r1 >= kOverfitMinRecall && monotone &&
           secs < kOverfitBudgetSeconds;
  v.detail = std::to_string(corpus.items.size()) + " items, " + std::to_string(cfg.steps) + " steps, R@1 " + num(r1) +
             ", loss windows " + num(windows.front()) + " -> " + num(windows.back()) +
             (monotone ? " monotone" : " NOT monotone") + ", " + num(secs, 3) + " s";
  return v;
}

Verdict metrics_criterion() {
  const auto r = cir::oracle::metrics_suite(kSeed, kMetricGalleries);
  const double hand = r.measures.at("hand_ap");
  Verdict v = suite_verdict(r, kNoBudget, ", hand AP " + num(hand, 17));
  v.pass = v.pass && hand == 5.0 / 6.0;
  return v;
}

Verdict synthesis_criterion() {
  const auto r = cir::oracle::synthesis_suite(kSeed, kSynthesisSamples);
  return suite_verdict(r, kNoBudget, ", fraction at 0.75: " + num(r.measures.at("fraction_at_0.75")));
}

Verdict ablation_criterion() {
  const auto corpus = cir::synthetic::make_corpus({});
  const auto index = cir::RetrievalIndex::from_table(corpus.table);
  const std::vector<std::size_t> ks = {1};
  Verdict v{true, ""};
  for (std::uint64_t seed : kAblationSeeds) {
    double recall[2];
    for (int mode = 0; mode < 2; ++mode) {
      cir::ModelConfig model;
      cir::TrainConfig cfg;
      cfg.seed = seed;
      cfg.synth.neighbor_mode = mode == 0 ? cir::NeighborMode::Nearest : cir::NeighborMode::Random;
      const auto result = cir::train_pretrain(corpus.items, model, cfg);
      recall[mode] = cir::evaluate(result.params, corpus.queries, index, ks).recall_at.at(1);
    }
    v.pass = v.pass && recall[0] >= recall[1];
    v.detail += (v.detail.empty() ? "" : ", ") + std::string("seed ") + std::to_string(seed) + " nearest " +
                num(recall[0], 3) + " vs random " + num(recall[1], 3);
  }
  return v;
}

Verdict refine_criterion() {
  const auto r = cir::oracle::refine_suite(kSeed);
  return suite_verdict(r, kNoBudget, "");
}

Verdict pairing_criterion() {
  const auto r = cir::oracle::pairing_suite(kSeed);
  return suite_verdict(r, kNoBudget,
                       ", " + num(r.measures.at("groups")) + " groups, sims in [" +
                           num(r.measures.at("min_similarity")) + ", " + num(r.measures.at("max_similarity")) +
                           "], min spacing " + num(r.measures.at("min_spacing")));
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Verdict determinism_criterion(const std::string& cli, const fs::path& data) {
  const fs::path root = fs::temp_directory_path() / "cir_acceptance_determinism";
  fs::remove_all(root);
  const std::string d = data.string();
  Verdict v{true, ""};
  for (const char* tag : {"run1", "run2"}) {
    const fs::path out = root / tag;
    fs::create_directories(out);
    const std::vector<std::string> commands = {
        "synth --items " + d + "/items.cirf --out " + (out / "synth.jsonl").string() + " --seed 11",
        "train --config " + d + "/config.json --steps 60 --seed 11 --out " + (out / "ck.json").string(),
        "refine --benchmark " + d + "/benchmark.jsonl --index " + d + "/items.cirf --judge mock:" + d +
            "/mock_judge.json --seed 11 --out " + (out / "refined.jsonl").string() + " --stats " +
            (out / "stats.json").string() + " --audit " + (out / "audit.jsonl").string(),
    };
    for (const auto& c : commands) {
      const std::string cmd = cli + " " + c + " > /dev/null 2>&1";
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        v.pass = false;
        v.detail = "command failed: " + c;
        return v;
      }
    }
  }
  std::size_t compared = 0;
  for (const char* file :
       {"synth.jsonl", "ck.json", "ck.json.weights", "refined.jsonl", "stats.json", "audit.jsonl"}) {
    const auto a = slurp(root / "run1" / file);
    const auto b = slurp(root / "run2" / file);
    if (a.empty() || a != b) {
      v.pass = false;
      v.detail += std::string(v.detail.empty() ? "" : ", ") + file + (a.empty() ? " empty" : " differs");
    }
    ++compared;
  }
  if (v.pass) v.detail = std::to_string(compared) + " output files byte-identical across two seeded runs";
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : CIR_CLI;
  const fs::path data = argc > 2 ? argv[2] : CIR_DATA_DIR;

  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "slerp properties", slerp_criterion},
      {2, "gradient check", gradient_criterion},
      {3, "overfit sanity", overfit_criterion},
      {4, "metric oracle equivalence", metrics_criterion},
      {5, "synthesis ratio", synthesis_criterion},
      {6, "nearest vs random ablation", ablation_criterion},
      {7, "refinement conformance", refine_criterion},
      {8, "pairing constraints", pairing_criterion},
      {9, "cli determinism", [&] { return determinism_criterion(cli, data); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::printf("criterion %d %-28s %s  %s\n", c.id, c.name, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
