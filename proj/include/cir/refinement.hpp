#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cir/random.hpp"
#include "cir/retrieval.hpp"

namespace cir {

struct BenchmarkTriplet {
  std::string ref_id;
  std::string target_id;
  std::string text;

  friend bool operator==(const BenchmarkTriplet&, const BenchmarkTriplet&) = default;
};

struct JudgeAnswer {
  enum class Kind { Index, Refusal, MinusOne };
  Kind kind = Kind::MinusOne;
  int index = -1;
  std::string raw;

  static JudgeAnswer pick(int i, std::string raw = {}) { return {Kind::Index, i, std::move(raw)}; }
  static JudgeAnswer refusal(std::string raw = "I apologize, but I cannot help with this request.") {
    return {Kind::Refusal, -1, std::move(raw)};
  }
  static JudgeAnswer minus_one(std::string raw = {}) { return {Kind::MinusOne, -1, std::move(raw)}; }
};

// A judge must not depend on or mutate refinement state. Implementations are
// called concurrently from several worker threads.
class JudgeClient {
 public:
  virtual ~JudgeClient() = default;

  // Which of `candidates` (0-based, left to right) is the target for the
  // reference and modification text.
  virtual JudgeAnswer validate(const std::string& ref_id, std::span<const std::string> candidates,
                               const std::string& text) = 0;

  // Three replacement texts, coarse to fine.
  virtual std::vector<std::string> generate(const std::string& ref_id, const std::string& target_id,
                                            const std::string& old_text,
                                            std::span<const std::string> good_examples) = 0;
};

// Scripted judge driven by a JSON fixture:
//   {"default": "correct" | "wrong" | "refuse" | "minus_one",
//    "validate": [{"ref_id", "text", "rounds": ["correct", "wrong", ...]}],
//    "generate": [{"ref_id", "target_id", "texts": [...]}]}
// Validation scripts are keyed by (ref_id, text) and replayed round by round
// (cycling). "correct" answers the position of the known target for ref_id,
// which comes from register_targets(). Unscripted generation returns three
// escalating variants of the old text.
class MockJudge : public JudgeClient {
 public:
  enum class Behavior { Correct, Wrong, Refuse, MinusOne };

  MockJudge() = default;
  static MockJudge from_json(const std::string& json_text);
  static MockJudge from_file(const std::filesystem::path& path);

  void set_default(Behavior b) { default_ = b; }
  void script_validation(const std::string& ref_id, const std::string& text, std::vector<Behavior> rounds);
  void script_generation(const std::string& ref_id, const std::string& target_id, std::vector<std::string> texts);
  void register_targets(std::span<const BenchmarkTriplet> triplets);

  JudgeAnswer validate(const std::string& ref_id, std::span<const std::string> candidates,
                       const std::string& text) override;
  std::vector<std::string> generate(const std::string& ref_id, const std::string& target_id,
                                    const std::string& old_text, std::span<const std::string> good_examples) override;

  std::size_t validate_calls() const;

 private:
  using Key = std::pair<std::string, std::string>;

  Behavior default_ = Behavior::Correct;
  std::map<Key, std::vector<Behavior>> validation_scripts_;
  std::map<Key, std::vector<std::string>> generation_scripts_;
  std::map<std::string, std::vector<std::string>> targets_by_ref_;
  std::unique_ptr<std::mutex> mu_ = std::make_unique<std::mutex>();
  std::map<Key, std::size_t> calls_;
  std::size_t total_calls_ = 0;
};

// The n ids most similar to the target (target and `exclude` left out), ties
// by id. Throws UnknownId for a missing target, IndexTooSmall when fewer than
// n candidates remain.
std::vector<std::string> mine_hard_negatives(const RetrievalIndex& index, const std::string& target_id,
                                             std::size_t n = 3, const IdSet& exclude = {});

inline constexpr int kValidationRounds = 3;
inline constexpr int kPassThreshold = 2;

struct ValidationRound {
  std::vector<std::string> candidate_order;
  JudgeAnswer answer;
  bool correct = false;
};

enum class Verdict { Pass, Fail, AllRefused };

struct ValidationOutcome {
  Verdict verdict = Verdict::Fail;
  int correct = 0;
  int refusals = 0;
  std::vector<ValidationRound> rounds;
};

// Three rounds over distinct shuffles of [target] + negatives. A round is
// correct iff the judge answers the target's position; refusals and -1 count
// as incorrect. Pass iff >= 2 correct; AllRefused iff every round refused.
ValidationOutcome validate_triplet(JudgeClient& judge, const BenchmarkTriplet& triplet,
                                   std::span<const std::string> negatives, Rng& rng);

struct RegeneratedTexts {
  std::array<std::string, 3> texts;
  // Whether each text has strictly more words than the previous one. Logged only.
  bool escalating = false;
};

// Throws MalformedGeneration unless the judge returns exactly three non-empty texts.
RegeneratedTexts regenerate_texts(JudgeClient& judge, const BenchmarkTriplet& triplet,
                                  std::span<const std::string> good_examples);

enum class RefinementState { Good, Regenerated, RemovedAmbiguous, RemovedHarmful };
std::string_view to_string(RefinementState s);

struct LoggedRound {
  int pass = 0;  // 0 = initial validation, 1..3 = re-validation of text level
  std::vector<std::string> candidate_order;
  JudgeAnswer answer;
};

struct RefinementRecord {
  BenchmarkTriplet triplet;
  RefinementState state = RefinementState::Good;
  int level = 0;  // 1..3 when Regenerated
  std::string new_text;
  std::vector<std::string> candidates;  // regenerated texts, empty if none
  bool escalating = false;
  int refusals = 0;
  std::vector<LoggedRound> round_log;
};

struct RefinementStats {
  std::size_t good = 0;
  std::array<std::size_t, 3> regenerated{};  // by level 1..3
  std::size_t removed_ambiguous = 0;
  std::size_t removed_harmful = 0;

  std::size_t total() const;
};

struct RefineConfig {
  std::uint64_t seed = 0;
  std::size_t concurrency = 4;
  std::size_t hard_negatives = 3;
  std::size_t max_good_examples = 3;
};

struct RefineResult {
  std::vector<RefinementRecord> records;  // input order
  RefinementStats stats;

  // Good triplets unchanged, regenerated ones with their chosen text.
  std::vector<BenchmarkTriplet> refined() const;
};

// Validation -> regeneration -> coarse-to-fine re-validation. Triplets are
// processed concurrently but each one draws its shuffles from its own stream
// (global seed mixed with a hash of the triplet), so results do not depend on
// scheduling.
RefineResult refine(std::span<const BenchmarkTriplet> triplets, const RetrievalIndex& index, JudgeClient& judge,
                    const RefineConfig& cfg);

std::uint64_t triplet_stream_seed(std::uint64_t seed, const BenchmarkTriplet& t);

}  // namespace cir
