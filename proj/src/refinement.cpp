#include "cir/refinement.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "cir/error.hpp"
#include "cir/text.hpp"
#include "json.hpp"

namespace cir {

namespace {

MockJudge::Behavior parse_behavior(const std::string& name) {
  if (name == "correct") return MockJudge::Behavior::Correct;
  if (name == "wrong") return MockJudge::Behavior::Wrong;
  if (name == "refuse") return MockJudge::Behavior::Refuse;
  if (name == "minus_one") return MockJudge::Behavior::MinusOne;
  throw Error(ErrorKind::Format, "unknown mock behavior '" + name + "'");
}

// Runs fn(i) for i in [0, count) on up to `workers` threads. The exception of
// the lowest failing index is rethrown after all workers finish.
template <typename Fn>
void run_indexed(std::size_t count, std::size_t workers, Fn&& fn) {
  std::vector<std::exception_ptr> failures(count);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(workers, count));
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
}

}  // namespace

MockJudge MockJudge::from_json(const std::string& json_text) {
  MockJudge judge;
  try {
    const auto doc = nlohmann::json::parse(json_text);
    if (doc.contains("default")) judge.default_ = parse_behavior(doc["default"].get<std::string>());
    for (const auto& v : doc.value("validate", nlohmann::json::array())) {
      std::vector<Behavior> rounds;
      for (const auto& r : v.at("rounds")) rounds.push_back(parse_behavior(r.get<std::string>()));
      judge.script_validation(v.at("ref_id").get<std::string>(), v.at("text").get<std::string>(), std::move(rounds));
    }
    for (const auto& g : doc.value("generate", nlohmann::json::array())) {
      judge.script_generation(g.at("ref_id").get<std::string>(), g.at("target_id").get<std::string>(),
                              g.at("texts").get<std::vector<std::string>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("mock judge fixture: ") + e.what());
  }
  return judge;
}

MockJudge MockJudge::from_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot open mock judge fixture " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return from_json(ss.str());
}

void MockJudge::script_validation(const std::string& ref_id, const std::string& text, std::vector<Behavior> rounds) {
  if (rounds.empty()) throw Error(ErrorKind::InvalidArgument, "validation script needs at least one round");
  validation_scripts_[{ref_id, text}] = std::move(rounds);
}

void MockJudge::script_generation(const std::string& ref_id, const std::string& target_id,
                                  std::vector<std::string> texts) {
  generation_scripts_[{ref_id, target_id}] = std::move(texts);
}

void MockJudge::register_targets(std::span<const BenchmarkTriplet> triplets) {
  for (const auto& t : triplets) {
    auto& v = targets_by_ref_[t.ref_id];
    if (std::find(v.begin(), v.end(), t.target_id) == v.end()) v.push_back(t.target_id);
  }
}

std::size_t MockJudge::validate_calls() const {
  std::lock_guard lock(*mu_);
  return total_calls_;
}

JudgeAnswer MockJudge::validate(const std::string& ref_id, std::span<const std::string> candidates,
                                const std::string& text) {
  Behavior behavior = default_;
  {
    std::lock_guard lock(*mu_);
    ++total_calls_;
    const Key key{ref_id, text};
    const std::size_t round = calls_[key]++;
    auto it = validation_scripts_.find(key);
    if (it != validation_scripts_.end()) behavior = it->second[round % it->second.size()];
  }
  int target_pos = -1;
  if (auto it = targets_by_ref_.find(ref_id); it != targets_by_ref_.end()) {
    for (std::size_t i = 0; i < candidates.size() && target_pos < 0; ++i) {
      if (std::find(it->second.begin(), it->second.end(), candidates[i]) != it->second.end()) {
        target_pos = static_cast<int>(i);
      }
    }
  }
  switch (behavior) {
    case Behavior::Correct:
      if (target_pos < 0) return JudgeAnswer::minus_one("{\"answer\": -1}");
      return JudgeAnswer::pick(target_pos, "{\"answer\": " + std::to_string(target_pos) + "}");
    case Behavior::Wrong: {
      const int wrong = target_pos == 0 ? 1 : 0;
      return JudgeAnswer::pick(wrong, "{\"answer\": " + std::to_string(wrong) + "}");
    }
    case Behavior::Refuse:
      return JudgeAnswer::refusal();
    case Behavior::MinusOne:
      return JudgeAnswer::minus_one("{\"answer\": -1}");
  }
  return JudgeAnswer::minus_one();
}

std::vector<std::string> MockJudge::generate(const std::string& ref_id, const std::string& target_id,
                                             const std::string& old_text, std::span<const std::string>) {
  if (auto it = generation_scripts_.find({ref_id, target_id}); it != generation_scripts_.end()) return it->second;
  return {old_text + " more clearly", old_text + " more clearly with one extra detail",
          old_text + " more clearly with one extra detail and the background"};
}

std::vector<std::string> mine_hard_negatives(const RetrievalIndex& index, const std::string& target_id, std::size_t n,
                                             const IdSet& exclude) {
  const auto target = index.find(target_id);
  if (!target) throw Error(ErrorKind::UnknownId, "target " + target_id + " not in index");
  IdSet skip = exclude;
  skip.insert(target_id);
  auto ranking = rank(index, index.embedding(target_id), skip);
  if (ranking.size() < n) {
    throw Error(ErrorKind::IndexTooSmall, "need " + std::to_string(n) + " hard negatives for " + target_id);
  }
  ranking.resize(n);
  return ranking;
}

ValidationOutcome validate_triplet(JudgeClient& judge, const BenchmarkTriplet& triplet,
                                   std::span<const std::string> negatives, Rng& rng) {
  if (negatives.size() != 3) throw Error(ErrorKind::InvalidArgument, "validation needs exactly 3 hard negatives");
  std::vector<std::string> base{triplet.target_id};
  base.insert(base.end(), negatives.begin(), negatives.end());

  ValidationOutcome out;
  for (int round = 0; round < kValidationRounds; ++round) {
    std::vector<std::string> order = base;
    do {
      std::shuffle(order.begin(), order.end(), rng);
    } while (std::any_of(out.rounds.begin(), out.rounds.end(),
                         [&](const ValidationRound& r) { return r.candidate_order == order; }));
    const auto answer = judge.validate(triplet.ref_id, order, triplet.text);
    const auto target_pos = static_cast<int>(std::find(order.begin(), order.end(), triplet.target_id) - order.begin());
    const bool correct = answer.kind == JudgeAnswer::Kind::Index && answer.index == target_pos;
    if (answer.kind == JudgeAnswer::Kind::Refusal) ++out.refusals;
    if (correct) ++out.correct;
    out.rounds.push_back({std::move(order), answer, correct});
  }
  if (out.refusals == kValidationRounds) {
    out.verdict = Verdict::AllRefused;
  } else {
    out.verdict = out.correct >= kPassThreshold ? Verdict::Pass : Verdict::Fail;
  }
  return out;
}

RegeneratedTexts regenerate_texts(JudgeClient& judge, const BenchmarkTriplet& triplet,
                                  std::span<const std::string> good_examples) {
  const auto texts = judge.generate(triplet.ref_id, triplet.target_id, triplet.text, good_examples);
  if (texts.size() != 3) {
    throw Error(ErrorKind::MalformedGeneration, "expected 3 texts, got " + std::to_string(texts.size()));
  }
  RegeneratedTexts out;
  for (std::size_t i = 0; i < 3; ++i) {
    if (tokenize(texts[i]).empty()) throw Error(ErrorKind::MalformedGeneration, "generated text is empty");
    out.texts[i] = texts[i];
  }
  out.escalating = tokenize(texts[0]).size() < tokenize(texts[1]).size() &&
                   tokenize(texts[1]).size() < tokenize(texts[2]).size();
  return out;
}

std::string_view to_string(RefinementState s) {
  switch (s) {
    case RefinementState::Good: return "good";
    case RefinementState::Regenerated: return "regenerated";
    case RefinementState::RemovedAmbiguous: return "removed_ambiguous";
    case RefinementState::RemovedHarmful: return "removed_harmful";
  }
  return "unknown";
}

std::size_t RefinementStats::total() const {
  return good + regenerated[0] + regenerated[1] + regenerated[2] + removed_ambiguous + removed_harmful;
}

std::vector<BenchmarkTriplet> RefineResult::refined() const {
  std::vector<BenchmarkTriplet> out;
  for (const auto& r : records) {
    if (r.state == RefinementState::Good) out.push_back(r.triplet);
    if (r.state == RefinementState::Regenerated) out.push_back({r.triplet.ref_id, r.triplet.target_id, r.new_text});
  }
  return out;
}

std::uint64_t triplet_stream_seed(std::uint64_t seed, const BenchmarkTriplet& t) {
  return mix_seed(seed, fnv1a64(t.ref_id + '\x1f' + t.target_id + '\x1f' + t.text));
}

namespace {

void log_rounds(RefinementRecord& record, int pass, const ValidationOutcome& outcome) {
  for (const auto& r : outcome.rounds) record.round_log.push_back({pass, r.candidate_order, r.answer});
  record.refusals += outcome.refusals;
}

}  // namespace

RefineResult refine(std::span<const BenchmarkTriplet> triplets, const RetrievalIndex& index, JudgeClient& judge,
                    const RefineConfig& cfg) {
  for (const auto& t : triplets) {
    if (t.ref_id == t.target_id) throw Error(ErrorKind::InvalidArgument, "reference equals target: " + t.ref_id);
    if (!index.find(t.ref_id)) throw Error(ErrorKind::UnknownId, "reference " + t.ref_id);
    if (!index.find(t.target_id)) throw Error(ErrorKind::UnknownId, "target " + t.target_id);
  }
  const std::size_t n = triplets.size();
  RefineResult result;
  result.records.resize(n);
  std::vector<Rng> streams(n);
  std::vector<std::vector<std::string>> negatives(n);
  std::vector<bool> pending(n, false);

  // Step 1: validate the original texts.
  run_indexed(n, cfg.concurrency, [&](std::size_t i) {
    const auto& t = triplets[i];
    auto& record = result.records[i];
    record.triplet = t;
    streams[i].seed(triplet_stream_seed(cfg.seed, t));
    negatives[i] = mine_hard_negatives(index, t.target_id, cfg.hard_negatives, {t.ref_id});
    const auto outcome = validate_triplet(judge, t, negatives[i], streams[i]);
    log_rounds(record, 0, outcome);
    if (outcome.verdict == Verdict::Pass) {
      record.state = RefinementState::Good;
    } else if (outcome.verdict == Verdict::AllRefused) {
      record.state = RefinementState::RemovedHarmful;
    } else {
      pending[i] = true;
    }
  });

  std::vector<std::string> good_pool;
  for (std::size_t i = 0; i < n; ++i) {
    if (result.records[i].state == RefinementState::Good && !pending[i]) good_pool.push_back(triplets[i].text);
  }

  // Steps 2 and 3: regenerate, then re-validate coarsest first.
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < n; ++i) {
    if (pending[i]) todo.push_back(i);
  }
  run_indexed(todo.size(), cfg.concurrency, [&](std::size_t k) {
    const std::size_t i = todo[k];
    auto& record = result.records[i];
    auto& rng = streams[i];
    std::vector<std::string> examples;
    std::sample(good_pool.begin(), good_pool.end(), std::back_inserter(examples),
                std::min(cfg.max_good_examples, good_pool.size()), rng);
    const auto regenerated = regenerate_texts(judge, record.triplet, examples);
    record.candidates.assign(regenerated.texts.begin(), regenerated.texts.end());
    record.escalating = regenerated.escalating;
    record.state = RefinementState::RemovedAmbiguous;
    for (int level = 1; level <= 3; ++level) {
      const BenchmarkTriplet candidate{record.triplet.ref_id, record.triplet.target_id,
                                       regenerated.texts[static_cast<std::size_t>(level - 1)]};
      const auto outcome = validate_triplet(judge, candidate, negatives[i], rng);
      log_rounds(record, level, outcome);
      if (outcome.verdict == Verdict::Pass) {
        record.state = RefinementState::Regenerated;
        record.level = level;
        record.new_text = candidate.text;
        break;
      }
      if (outcome.verdict == Verdict::AllRefused) {
        record.state = RefinementState::RemovedHarmful;
        break;
      }
    }
  });

  for (const auto& r : result.records) {
    switch (r.state) {
      case RefinementState::Good: ++result.stats.good; break;
      case RefinementState::Regenerated: ++result.stats.regenerated[static_cast<std::size_t>(r.level - 1)]; break;
      case RefinementState::RemovedAmbiguous: ++result.stats.removed_ambiguous; break;
      case RefinementState::RemovedHarmful: ++result.stats.removed_harmful; break;
    }
  }
  return result;
}

}  // namespace cir
