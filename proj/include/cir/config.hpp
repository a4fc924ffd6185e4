#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cir/judge_http.hpp"
#include "cir/pairing.hpp"
#include "cir/refinement.hpp"
#include "cir/synthesis.hpp"
#include "cir/train.hpp"
#include "json.hpp"

namespace cir {

enum class TrainMode { Pretrain, Triplet };

// Everything a run can be configured with. Loaded from a JSON file with the
// sections synth, model, train, eval, pair and refine plus a global seed;
// unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  SynthConfig synth;
  ModelConfig model;

  TrainMode train_mode = TrainMode::Pretrain;
  std::filesystem::path train_items;     // embedding file with captions sibling
  std::filesystem::path train_triplets;  // triplet JSONL (triplet mode)
  TrainConfig train;                     // seed and synth mirror the fields above

  std::vector<std::size_t> eval_ks = {1, 5, 10, 50};
  PairingConfig pair;
  RefineConfig refine;
  HttpJudgeOptions judge;
};

// Relative paths are resolved against `base_dir`.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const RunConfig& cfg);

struct ConfigKey {
  std::string name;  // "section.key" or "seed"
  std::string default_value;
  std::string description;
};
const std::vector<ConfigKey>& config_keys();
std::string config_reference();

}  // namespace cir
