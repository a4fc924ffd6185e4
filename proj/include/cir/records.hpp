#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cir/embedding_io.hpp"
#include "cir/pairing.hpp"
#include "cir/refinement.hpp"
#include "cir/retrieval.hpp"
#include "cir/synthesis.hpp"
#include "json.hpp"

// JSON / JSONL serialization of the toolkit's records.
namespace cir {

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& lines);

std::vector<CaptionedItem> captioned_items(const EmbeddingTable& table);

// {reference: [floats], text, target_id, neighbor_id, template_id, synthesized}
nlohmann::json to_json(const SynthesizedTriplet& t);

// Triplet JSONL -> training samples; target embeddings (and captions) come from `items`.
std::vector<TrainingSample> read_training_triplets(const std::filesystem::path& path, const EmbeddingTable& items);

// {query_id, reference_id, text, gt_ids: [...], subset_ids: [...]?}
QueryRecord query_from_json(const nlohmann::json& j);
nlohmann::json to_json(const QueryRecord& q);
std::vector<QueryRecord> read_queries(const std::filesystem::path& path);

nlohmann::json to_json(const MetricReport& report);

// {ref_id, target_id, text}
std::vector<BenchmarkTriplet> read_benchmark(const std::filesystem::path& path);
nlohmann::json to_json(const BenchmarkTriplet& t);
nlohmann::json to_json(const RefinementStats& stats);
nlohmann::json to_json(const RefinementRecord& record);

// {seed, members: [...], similarities: [...], pairs: [[ref, tgt], ...]}
nlohmann::json to_json(const PairGroup& g);
PairGroup group_from_json(const nlohmann::json& j);

// {ref_id, tgt_id, direction, category, text}
nlohmann::json to_json(const ModificationRecord& r);

}  // namespace cir
