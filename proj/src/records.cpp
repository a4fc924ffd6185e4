#include "cir/records.hpp"

#include <fstream>

#include "cir/error.hpp"

namespace cir {

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Format, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& lines) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  for (const auto& j : lines) os << j.dump() << '\n';
  if (!os) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::vector<CaptionedItem> captioned_items(const EmbeddingTable& table) {
  std::vector<CaptionedItem> out;
  out.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& item = table.items()[i];
    if (item.caption.empty()) throw Error(ErrorKind::Format, "item " + item.id + " has no caption");
    out.push_back({item.id, item.caption, table.embedding(i)});
  }
  return out;
}

nlohmann::json to_json(const SynthesizedTriplet& t) {
  auto ref = t.reference_embedding.values();
  nlohmann::json j{{"reference", std::vector<float>(ref.begin(), ref.end())},
                   {"text", t.modification_text},
                   {"target_id", t.target_id},
                   {"neighbor_id", t.neighbor_id},
                   {"template_id", nullptr},
                   {"synthesized", t.text_was_synthesized}};
  if (t.template_id) j["template_id"] = *t.template_id;
  return j;
}

std::vector<TrainingSample> read_training_triplets(const std::filesystem::path& path, const EmbeddingTable& items) {
  std::vector<TrainingSample> out;
  try {
    for (const auto& j : read_jsonl(path)) {
      const auto target_id = j.at("target_id").get<std::string>();
      const std::size_t row = items.at(target_id);
      auto reference = UnitEmbedding::from_unit(j.at("reference").get<std::vector<float>>());
      out.push_back({std::move(reference), j.at("text").get<std::string>(), items.items()[row].caption,
                     items.embedding(row)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
  return out;
}

QueryRecord query_from_json(const nlohmann::json& j) {
  try {
    QueryRecord q;
    q.query_id = j.at("query_id").get<std::string>();
    if (j.contains("reference_id") && !j["reference_id"].is_null()) q.reference_id = j["reference_id"].get<std::string>();
    if (j.contains("text") && !j["text"].is_null()) q.text = j["text"].get<std::string>();
    for (const auto& id : j.at("gt_ids")) q.ground_truth_ids.insert(id.get<std::string>());
    if (j.contains("subset_ids") && !j["subset_ids"].is_null()) {
      q.subset_ids = j["subset_ids"].get<std::vector<std::string>>();
    }
    return q;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("query: ") + e.what());
  }
}

nlohmann::json to_json(const QueryRecord& q) {
  nlohmann::json j{{"query_id", q.query_id},
                   {"reference_id", nullptr},
                   {"text", nullptr},
                   {"gt_ids", std::vector<std::string>(q.ground_truth_ids.begin(), q.ground_truth_ids.end())}};
  if (q.reference_id) j["reference_id"] = *q.reference_id;
  if (q.text) j["text"] = *q.text;
  if (q.subset_ids) j["subset_ids"] = *q.subset_ids;
  return j;
}

std::vector<QueryRecord> read_queries(const std::filesystem::path& path) {
  std::vector<QueryRecord> out;
  for (const auto& j : read_jsonl(path)) out.push_back(query_from_json(j));
  return out;
}

nlohmann::json to_json(const MetricReport& report) {
  auto as_obj = [](const std::map<std::size_t, double>& m) {
    nlohmann::json o = nlohmann::json::object();
    for (const auto& [k, v] : m) o[std::to_string(k)] = v;
    return o;
  };
  nlohmann::json j{{"num_queries", report.num_queries},
                   {"recall_at", as_obj(report.recall_at)},
                   {"map_at", as_obj(report.map_at)},
                   {"recall_subset_at", nullptr},
                   {"recall_sum", report.recall_sum()}};
  if (report.recall_subset_at) {
    j["recall_subset_at"] = as_obj(*report.recall_subset_at);
    j["recall_subset_note"] =
        "unreliable: subset ranking can be solved from the text alone and does not measure composition";
  }
  return j;
}

std::vector<BenchmarkTriplet> read_benchmark(const std::filesystem::path& path) {
  std::vector<BenchmarkTriplet> out;
  try {
    for (const auto& j : read_jsonl(path)) {
      out.push_back({j.at("ref_id").get<std::string>(), j.at("target_id").get<std::string>(),
                     j.at("text").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
  return out;
}

nlohmann::json to_json(const BenchmarkTriplet& t) {
  return {{"ref_id", t.ref_id}, {"target_id", t.target_id}, {"text", t.text}};
}

nlohmann::json to_json(const RefinementStats& s) {
  return {{"good", s.good},
          {"regenerated", {{"1", s.regenerated[0]}, {"2", s.regenerated[1]}, {"3", s.regenerated[2]}}},
          {"removed_ambiguous", s.removed_ambiguous},
          {"removed_harmful", s.removed_harmful}};
}

nlohmann::json to_json(const RefinementRecord& r) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& round : r.round_log) {
    nlohmann::json answer;
    switch (round.answer.kind) {
      case JudgeAnswer::Kind::Index: answer = round.answer.index; break;
      case JudgeAnswer::Kind::MinusOne: answer = -1; break;
      case JudgeAnswer::Kind::Refusal: answer = "refusal"; break;
    }
    rounds.push_back({{"pass", round.pass}, {"candidates", round.candidate_order}, {"answer", answer}});
  }
  nlohmann::json j{{"triplet", to_json(r.triplet)},
                   {"state", std::string(to_string(r.state))},
                   {"refusals", r.refusals},
                   {"rounds", rounds}};
  if (r.state == RefinementState::Regenerated) {
    j["level"] = r.level;
    j["new_text"] = r.new_text;
  }
  if (!r.candidates.empty()) {
    j["candidates"] = r.candidates;
    j["escalating"] = r.escalating;
  }
  return j;
}

nlohmann::json to_json(const PairGroup& g) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [a, b] : pairs_from_group(g)) pairs.push_back({a, b});
  return {{"seed", g.member_ids.front()},
          {"members", g.member_ids},
          {"similarities", g.seed_similarity},
          {"pairs", pairs}};
}

PairGroup group_from_json(const nlohmann::json& j) {
  try {
    PairGroup g;
    g.member_ids = j.at("members").get<std::vector<std::string>>();
    if (j.contains("similarities")) g.seed_similarity = j["similarities"].get<std::vector<double>>();
    if (g.member_ids.size() < 2) throw Error(ErrorKind::Format, "group needs at least two members");
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("group: ") + e.what());
  }
}

nlohmann::json to_json(const ModificationRecord& r) {
  return {{"ref_id", r.ref_id},
          {"tgt_id", r.tgt_id},
          {"direction", std::string(to_string(r.direction))},
          {"category", std::string(to_string(r.category))},
          {"text", r.text}};
}

}  // namespace cir
