#include "cir/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "cir/error.hpp"

namespace cir {

namespace {

void reject_unknown(const nlohmann::json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw Error(ErrorKind::Format, where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) throw Error(ErrorKind::Format, "unknown config key '" + where + "." + key + "'");
  }
}

template <typename T>
void read_into(const nlohmann::json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.empty() || path.is_absolute() || base.empty()) return path;
  return base / path;
}

std::string neighbor_name(NeighborMode m) { return m == NeighborMode::Nearest ? "nearest" : "random"; }

}  // namespace

RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  try {
    reject_unknown(doc, "<root>", {"seed", "synth", "model", "train", "eval", "pair", "refine"});
    read_into(doc, "seed", cfg.seed);

    if (doc.contains("synth")) {
      const auto& s = doc["synth"];
      reject_unknown(s, "synth", {"alpha", "text_synthesis_ratio", "noise_sigma", "template_ids", "neighbor_mode"});
      read_into(s, "alpha", cfg.synth.alpha);
      read_into(s, "text_synthesis_ratio", cfg.synth.text_synthesis_ratio);
      read_into(s, "noise_sigma", cfg.synth.noise_sigma);
      read_into(s, "template_ids", cfg.synth.template_ids);
      if (s.contains("neighbor_mode")) {
        const auto m = s["neighbor_mode"].get<std::string>();
        if (m == "nearest") {
          cfg.synth.neighbor_mode = NeighborMode::Nearest;
        } else if (m == "random") {
          cfg.synth.neighbor_mode = NeighborMode::Random;
        } else {
          throw Error(ErrorKind::Format, "synth.neighbor_mode must be nearest or random");
        }
      }
    }
    if (doc.contains("model")) {
      const auto& m = doc["model"];
      reject_unknown(m, "model", {"hidden_dim", "vocab_buckets", "tau"});
      read_into(m, "hidden_dim", cfg.model.hidden_dim);
      read_into(m, "vocab_buckets", cfg.model.vocab_buckets);
      read_into(m, "tau", cfg.model.tau);
    }
    if (doc.contains("train")) {
      const auto& t = doc["train"];
      reject_unknown(t, "train", {"mode", "items", "triplets", "learning_rate", "batch_size", "steps", "beta1",
                                  "beta2", "epsilon"});
      if (t.contains("mode")) {
        const auto m = t["mode"].get<std::string>();
        if (m == "pretrain") {
          cfg.train_mode = TrainMode::Pretrain;
        } else if (m == "triplet") {
          cfg.train_mode = TrainMode::Triplet;
        } else {
          throw Error(ErrorKind::Format, "train.mode must be pretrain or triplet");
        }
      }
      if (t.contains("items")) cfg.train_items = resolve(base_dir, t["items"].get<std::string>());
      if (t.contains("triplets")) cfg.train_triplets = resolve(base_dir, t["triplets"].get<std::string>());
      read_into(t, "learning_rate", cfg.train.learning_rate);
      read_into(t, "batch_size", cfg.train.batch_size);
      read_into(t, "steps", cfg.train.steps);
      read_into(t, "beta1", cfg.train.adam.beta1);
      read_into(t, "beta2", cfg.train.adam.beta2);
      read_into(t, "epsilon", cfg.train.adam.epsilon);
    }
    if (doc.contains("eval")) {
      const auto& e = doc["eval"];
      reject_unknown(e, "eval", {"ks"});
      read_into(e, "ks", cfg.eval_ks);
    }
    if (doc.contains("pair")) {
      const auto& p = doc["pair"];
      reject_unknown(p, "pair", {"low", "high", "interval", "group_size"});
      read_into(p, "low", cfg.pair.low);
      read_into(p, "high", cfg.pair.high);
      read_into(p, "interval", cfg.pair.interval);
      read_into(p, "group_size", cfg.pair.group_size);
    }
    if (doc.contains("refine")) {
      const auto& r = doc["refine"];
      reject_unknown(r, "refine", {"concurrency", "hard_negatives", "max_good_examples", "judge_timeout_ms",
                                   "judge_retries"});
      read_into(r, "concurrency", cfg.refine.concurrency);
      read_into(r, "hard_negatives", cfg.refine.hard_negatives);
      read_into(r, "max_good_examples", cfg.refine.max_good_examples);
      if (r.contains("judge_timeout_ms")) cfg.judge.timeout = std::chrono::milliseconds(r["judge_timeout_ms"].get<long>());
      read_into(r, "judge_retries", cfg.judge.retries);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("config: ") + e.what());
  }
  cfg.train.seed = cfg.seed;
  cfg.train.synth = cfg.synth;
  cfg.refine.seed = cfg.seed;
  cfg.synth.validate();
  cfg.train.validate();
  cfg.pair.validate();
  for (std::size_t k : cfg.eval_ks) {
    if (k < 1) throw Error(ErrorKind::Format, "eval.ks entries must be >= 1");
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot open config " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

nlohmann::json to_json(const RunConfig& cfg) {
  return {
      {"seed", cfg.seed},
      {"synth",
       {{"alpha", cfg.synth.alpha},
        {"text_synthesis_ratio", cfg.synth.text_synthesis_ratio},
        {"noise_sigma", cfg.synth.noise_sigma},
        {"template_ids", cfg.synth.template_ids},
        {"neighbor_mode", neighbor_name(cfg.synth.neighbor_mode)}}},
      {"model",
       {{"hidden_dim", cfg.model.hidden_dim}, {"vocab_buckets", cfg.model.vocab_buckets}, {"tau", cfg.model.tau}}},
      {"train",
       {{"mode", cfg.train_mode == TrainMode::Pretrain ? "pretrain" : "triplet"},
        {"items", cfg.train_items.string()},
        {"triplets", cfg.train_triplets.string()},
        {"learning_rate", cfg.train.learning_rate},
        {"batch_size", cfg.train.batch_size},
        {"steps", cfg.train.steps},
        {"beta1", cfg.train.adam.beta1},
        {"beta2", cfg.train.adam.beta2},
        {"epsilon", cfg.train.adam.epsilon}}},
      {"eval", {{"ks", cfg.eval_ks}}},
      {"pair",
       {{"low", cfg.pair.low},
        {"high", cfg.pair.high},
        {"interval", cfg.pair.interval},
        {"group_size", cfg.pair.group_size}}},
      {"refine",
       {{"concurrency", cfg.refine.concurrency},
        {"hard_negatives", cfg.refine.hard_negatives},
        {"max_good_examples", cfg.refine.max_good_examples},
        {"judge_timeout_ms", cfg.judge.timeout.count()},
        {"judge_retries", cfg.judge.retries}}},
  };
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"seed", "0", "global seed for every random stream"},
      {"synth.alpha", "0.5", "slerp weight; 1 keeps the augmented target, 0 the neighbor"},
      {"synth.text_synthesis_ratio", "0.75", "probability a sample gets a template text instead of its caption"},
      {"synth.noise_sigma", "0.05", "std of the Gaussian embedding augmentation"},
      {"synth.template_ids", "[1..15]", "templates eligible for text synthesis"},
      {"synth.neighbor_mode", "nearest", "nearest | random in-batch partner for interpolation"},
      {"model.hidden_dim", "64", "adapter and fusion width"},
      {"model.vocab_buckets", "4096", "hashed text feature buckets"},
      {"model.tau", "0.07", "initial contrastive temperature, clamped to [0.01, 1]"},
      {"train.mode", "pretrain", "pretrain (image-caption pairs) | triplet"},
      {"train.items", "", "embedding file (captions in the sibling .jsonl)"},
      {"train.triplets", "", "triplet JSONL for triplet mode"},
      {"train.learning_rate", "0.001", "Adam step size"},
      {"train.batch_size", "64", "samples per step, >= 2"},
      {"train.steps", "500", "optimizer steps"},
      {"train.beta1", "0.9", "Adam first-moment decay"},
      {"train.beta2", "0.999", "Adam second-moment decay"},
      {"train.epsilon", "1e-08", "Adam denominator epsilon"},
      {"eval.ks", "[1,5,10,50]", "cutoffs for Recall@k and mAP@k"},
      {"pair.low", "0.5", "minimum similarity to the group seed"},
      {"pair.high", "0.95", "maximum similarity to the group seed"},
      {"pair.interval", "0.03", "minimum similarity spacing between accepted members"},
      {"pair.group_size", "6", "members per group, seed included"},
      {"refine.concurrency", "4", "triplets validated concurrently"},
      {"refine.hard_negatives", "3", "hard negatives shown next to the target"},
      {"refine.max_good_examples", "3", "good samples passed to regeneration"},
      {"refine.judge_timeout_ms", "30000", "HTTP judge timeout per request"},
      {"refine.judge_retries", "2", "HTTP judge retries (exponential backoff)"},
  };
  return keys;
}

std::string config_reference() {
  std::ostringstream os;
  os << "Config keys (JSON file, unknown keys rejected):\n";
  for (const auto& k : config_keys()) {
    os << "  " << k.name;
    for (std::size_t pad = k.name.size(); pad < 28; ++pad) os << ' ';
    os << "default " << (k.default_value.empty() ? "\"\"" : k.default_value) << "  " << k.description << "\n";
  }
  return os.str();
}

}  // namespace cir
