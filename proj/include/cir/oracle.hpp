#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cir/composer.hpp"
#include "cir/embedding_io.hpp"
#include "cir/pairing.hpp"
#include "cir/refinement.hpp"
#include "cir/retrieval.hpp"

// Brute-force reference implementations and the property suites built on
// them. None of the references call the routine they check; they are written
// from the definitions, usually in long double.
namespace cir::oracle {

// ---- references ------------------------------------------------------------

std::vector<long double> slerp_reference(std::span<const float> a, std::span<const float> b, long double alpha);

// Angle via 2*atan2(|u-v|, |u+v|); well conditioned near 0 and pi, unlike acos.
long double angle_reference(std::span<const float> u, std::span<const float> v);
long double angle_reference(std::span<const long double> u, std::span<const long double> v);

// Sequential double dot product over float inputs, clamped to [-1, 1].
double cosine_reference(std::span<const float> a, std::span<const float> b);

// O(N^2) selection sort: similarity descending, id ascending.
std::vector<std::string> rank_reference(const std::vector<std::string>& ids, const EmbeddingMatrix& gallery,
                                        std::span<const float> query, const IdSet& exclude);

double recall_reference(const std::vector<std::vector<std::string>>& rankings, const std::vector<IdSet>& gts,
                        std::size_t k);
double map_reference(const std::vector<std::vector<std::string>>& rankings, const std::vector<IdSet>& gts,
                     std::size_t k);

// Hashed bag-of-tokens written out independently (FNV-1a over lowercased
// tokens split at whitespace and punctuation), dense, L2-normalized.
std::vector<long double> text_features_reference(const std::string& text, std::size_t vocab_buckets);

// Composer forward pass and contrastive losses in long double.
std::vector<long double> compose_reference(const ComposerParams& p, const UnitEmbedding* reference,
                                           const std::string* text);
long double contrastive_reference(const std::vector<std::vector<long double>>& queries,
                                  const std::vector<std::vector<long double>>& targets, long double tau);
long double loss_reference(const ComposerParams& p, std::span<const TrainingSample> batch, LossMode mode);

// Central differences of loss_reference over every parameter (tau included).
ComposerParams finite_difference_gradient(const ComposerParams& p, std::span<const TrainingSample> batch,
                                          LossMode mode, double step);

// Direct simulation of the grouping rule.
std::vector<std::vector<std::string>> groups_reference(const EmbeddingTable& table, const PairingConfig& cfg);
std::set<std::pair<std::string, std::string>> group_pairs_reference(const std::vector<std::string>& members);

// ---- suites ------------------------------------------------------------------

struct SuiteResult {
  std::string name;
  bool passed = true;
  std::size_t cases = 0;
  double seconds = 0.0;
  std::map<std::string, double> measures;  // worst errors and similar diagnostics
  std::vector<std::string> failures;       // first few failure descriptions

  void fail(std::string what);
};

struct GradientCheckConfig {
  std::size_t configs = 20;
  double step = 1e-4;
  double tolerance = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps entries
  // that are zero up to rounding from dominating the statistic.
  double floor = 1e-6;
};

SuiteResult slerp_suite(std::uint64_t seed, std::size_t cases = 1000);
SuiteResult metrics_suite(std::uint64_t seed, std::size_t galleries = 1000);
SuiteResult gradient_suite(std::uint64_t seed, const GradientCheckConfig& cfg = {});
SuiteResult synthesis_suite(std::uint64_t seed, std::size_t samples = 10000);
SuiteResult pairing_suite(std::uint64_t seed, std::size_t corpora = 20);
SuiteResult refine_suite(std::uint64_t seed);

// The scripted eight-triplet refinement scenario shared by refine_suite and the tests.
struct RefineScenario {
  RetrievalIndex index;
  std::vector<BenchmarkTriplet> triplets;
  MockJudge judge;
  std::vector<RefinementState> expected_state;
  std::vector<int> expected_level;  // 0 unless Regenerated
};
RefineScenario refine_scenario();

const std::vector<std::string>& suite_names();
SuiteResult run_suite(const std::string& name, std::uint64_t seed);

}  // namespace cir::oracle
