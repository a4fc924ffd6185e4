#include "cir/pairing.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "cir/kernels.hpp"
#include "json.hpp"

namespace cir {

void PairingConfig::validate() const {
  if (!(low >= -1.0 && low <= high && high <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "pair.low/high must satisfy -1 <= low <= high <= 1");
  }
  if (!(interval >= 0.0)) throw Error(ErrorKind::InvalidArgument, "pair.interval must be >= 0");
  if (group_size < 2) throw Error(ErrorKind::InvalidArgument, "pair.group_size must be >= 2");
}

std::vector<PairGroup> build_groups(const EmbeddingTable& records, const PairingConfig& cfg) {
  cfg.validate();
  std::vector<PairGroup> groups;
  const std::size_t n = records.size();
  if (n < cfg.group_size) return groups;

  const auto& items = records.items();
  std::vector<std::size_t> by_id(n);
  std::iota(by_id.begin(), by_id.end(), 0);
  std::sort(by_id.begin(), by_id.end(), [&](std::size_t a, std::size_t b) { return items[a].id < items[b].id; });

  std::vector<bool> used(n, false);
  for (std::size_t seed : by_id) {
    if (used[seed]) continue;
    auto sims = kernels::scores(records.matrix(), records.matrix().row(seed));
    for (double& s : sims) s = std::clamp(s, -1.0, 1.0);

    std::vector<std::size_t> candidates;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != seed && !used[j]) candidates.push_back(j);
    }
    std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
      if (sims[a] != sims[b]) return sims[a] > sims[b];
      return items[a].id < items[b].id;
    });

    PairGroup group{{items[seed].id}, {1.0}};
    std::vector<std::size_t> members{seed};
    for (std::size_t j : candidates) {
      if (members.size() == cfg.group_size) break;
      const double s = sims[j];
      if (s < cfg.low || s > cfg.high) continue;
      bool spaced = true;
      for (std::size_t m = 1; m < members.size(); ++m) {
        if (std::abs(s - group.seed_similarity[m]) < cfg.interval) {
          spaced = false;
          break;
        }
      }
      if (!spaced) continue;
      members.push_back(j);
      group.member_ids.push_back(items[j].id);
      group.seed_similarity.push_back(s);
    }
    if (members.size() < cfg.group_size) continue;
    for (std::size_t m : members) used[m] = true;
    groups.push_back(std::move(group));
  }
  return groups;
}

std::vector<std::pair<std::string, std::string>> pairs_from_group(const PairGroup& group) {
  const auto& m = group.member_ids;
  std::vector<std::pair<std::string, std::string>> out;
  std::set<std::pair<std::string, std::string>> seen;
  auto add = [&](const std::string& a, const std::string& b) {
    if (a == b) return;
    if (seen.emplace(a, b).second) out.emplace_back(a, b);
  };
  for (std::size_t i = 0; i + 1 < m.size(); ++i) add(m[i], m[i + 1]);
  for (std::size_t i = 1; i < m.size(); ++i) add(m[0], m[i]);
  return out;
}

std::string_view to_string(ModificationCategory c) {
  switch (c) {
    case ModificationCategory::AttributeChange: return "attribute_change";
    case ModificationCategory::AddedObject: return "added_object";
    case ModificationCategory::RemovedObject: return "removed_object";
    case ModificationCategory::RelationshipChange: return "relationship_change";
    case ModificationCategory::ViewpointChange: return "viewpoint_change";
    case ModificationCategory::NumberChange: return "number_change";
  }
  return "unknown";
}

std::optional<ModificationCategory> parse_category(std::string_view id) {
  for (auto c : kAllCategories) {
    if (to_string(c) == id) return c;
  }
  return std::nullopt;
}

std::string_view to_string(Direction d) { return d == Direction::Forward ? "forward" : "backward"; }

const std::vector<CategoryDefinition>& default_category_definitions() {
  static const std::vector<CategoryDefinition> defs = {
      {ModificationCategory::AttributeChange,
       "The same object is present in both images, but the attributes of the object have changed, not including "
       "the quantity or number."},
      {ModificationCategory::AddedObject,
       "An object or objects is present in the second image that is not present in the first image."},
      {ModificationCategory::RemovedObject,
       "An object or objects is present in the first image that is not present in the second image."},
      {ModificationCategory::RelationshipChange,
       "If the objects in the images are the same, but the relationship between the objects has changed."},
      {ModificationCategory::ViewpointChange,
       "The viewpoint from which the image is taken has changed between the two images."},
      {ModificationCategory::NumberChange,
       "The same object is present in both images, but the number of the object has changed."},
  };
  return defs;
}

const std::vector<CategoryExample>& default_category_examples() {
  static const std::vector<CategoryExample> examples = {
      {ModificationCategory::AttributeChange, "a red car parked on a quiet street",
       "a blue car parked on a quiet street", "make the car blue", "make the car red"},
      {ModificationCategory::AddedObject, "a dog lying on a grey couch", "a dog and a cat lying on a grey couch",
       "add a cat next to the dog", "remove the cat"},
      {ModificationCategory::RemovedObject, "a wooden table with a vase and a book", "a wooden table with a vase",
       "remove the book from the table", "add a book beside the vase"},
      {ModificationCategory::RelationshipChange, "a cat sitting on top of a cardboard box",
       "a cat sitting next to a cardboard box", "move the cat beside the box", "put the cat on top of the box"},
      {ModificationCategory::ViewpointChange, "a bicycle photographed from the side",
       "a bicycle photographed from above", "show the bicycle from above", "show the bicycle from the side"},
      {ModificationCategory::NumberChange, "two apples on a white plate", "four apples on a white plate",
       "add two more apples", "take away two apples"},
  };
  return examples;
}

const char* const kGenerationSystemPrompt =
    "You are a language assistant that helps to generate the modification text between two image captions.";

std::string assemble_generation_prompt(std::string_view caption1, std::string_view caption2,
                                       const std::vector<CategoryDefinition>& category_defs,
                                       const std::vector<CategoryExample>& good_examples,
                                       const std::vector<std::string>& bad_examples) {
  std::set<ModificationCategory> covered;
  for (const auto& d : category_defs) covered.insert(d.category);
  if (covered.size() != kAllCategories.size()) {
    throw Error(ErrorKind::InvalidArgument, "category definitions must cover all six categories");
  }

  std::ostringstream os;
  os << "Generate the modified text for the following pair of image captions:\n";
  os << "Caption 1: " << caption1 << "\n";
  os << "Caption 2: " << caption2 << "\n";
  os << "<instruction>\n";
  os << "You need to answer in both forward, changes from image 1 to image 2, and backward, changes from image 2 "
        "to image 1, directions. The definition of each category and examples are as follows:\n";
  std::size_t number = 1;
  for (const auto& def : category_defs) {
    os << number++ << ". " << to_string(def.category) << ": " << def.definition << "\n";
    for (const auto& ex : good_examples) {
      if (ex.category != def.category) continue;
      os << "<example>\n";
      os << "Caption 1: " << ex.caption1 << "\n";
      os << "Caption 2: " << ex.caption2 << "\n";
      os << "Forward: " << ex.forward << "\n";
      os << "Backward: " << ex.backward << "\n";
      os << "</example>\n";
    }
  }
  os << "The text needs to be concise and details as you can see the images, not as you are reading the text. "
        "You should not add words \"details, specific, description\" to the text.";
  if (!bad_examples.empty()) {
    os << " Here are some bad examples:\n<example>\n";
    for (const auto& bad : bad_examples) os << bad << "\n";
    os << "</example>";
  }
  os << "\n</instruction>\n";
  os << "One category can has multiple changes. For each change, you need to write one short sentence less than 20 "
        "words to describe the change. You need to answer all changes in the json format. Here is an example of "
        "the correct format:\n";
  os << R"({"forward": [{"category": "number_change", "text": "modified text"},...],"backward": [{"category": "number_change","text": "modified text"},...]})";
  os << "\n";
  return os.str();
}

std::size_t word_count(std::string_view text) {
  std::size_t count = 0;
  bool in_word = false;
  for (char ch : text) {
    const bool space = std::isspace(static_cast<unsigned char>(ch)) != 0;
    if (!space && !in_word) ++count;
    in_word = !space;
  }
  return count;
}

ParsedResponse parse_generation_response(std::string_view raw, const std::string& ref_id, const std::string& tgt_id) {
  nlohmann::json doc = nlohmann::json::parse(raw, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    const auto open = raw.find('{');
    const auto close = raw.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
      throw Error(ErrorKind::MalformedResponse, "no JSON object in response");
    }
    doc = nlohmann::json::parse(raw.substr(open, close - open + 1), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw Error(ErrorKind::MalformedResponse, "response is not JSON");
  }
  if (!doc.contains("forward") && !doc.contains("backward")) {
    throw Error(ErrorKind::MalformedResponse, "response has neither forward nor backward list");
  }

  ParsedResponse out;
  for (Direction dir : {Direction::Forward, Direction::Backward}) {
    const std::string key(to_string(dir));
    if (!doc.contains(key)) continue;
    const auto& list = doc[key];
    if (!list.is_array()) throw Error(ErrorKind::MalformedResponse, key + " is not a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto& entry = list[i];
      auto reject = [&](ErrorKind why, std::string detail) {
        out.rejected.push_back({dir, i, why, std::move(detail)});
      };
      if (!entry.is_object() || !entry.contains("category") || !entry.contains("text") ||
          !entry["category"].is_string() || !entry["text"].is_string()) {
        reject(ErrorKind::MalformedResponse, "entry needs string category and text");
        continue;
      }
      const auto cat_name = entry["category"].get<std::string>();
      const auto category = parse_category(cat_name);
      if (!category) {
        reject(ErrorKind::UnknownCategory, cat_name);
        continue;
      }
      auto text = entry["text"].get<std::string>();
      const auto words = word_count(text);
      if (words == 0) {
        reject(ErrorKind::MalformedResponse, "empty text");
        continue;
      }
      if (words > kMaxModificationWords) {
        reject(ErrorKind::OverlongText, std::to_string(words) + " words");
        continue;
      }
      out.records.push_back({ref_id, tgt_id, dir, *category, std::move(text)});
    }
  }
  return out;
}

namespace {

std::set<std::string> lowercase_words(std::string_view text) {
  std::set<std::string> words;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      words.insert(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.insert(std::move(cur));
  return words;
}

}  // namespace

FilterResult biometric_filter(const std::vector<ModificationRecord>& records, const std::vector<std::string>& keywords) {
  std::set<std::string> lowered;
  for (const auto& k : keywords) {
    std::string l;
    for (char ch : k) l.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    lowered.insert(std::move(l));
  }
  FilterResult out;
  for (const auto& r : records) {
    const auto words = lowercase_words(r.text);
    const bool hit = std::any_of(lowered.begin(), lowered.end(), [&](const auto& k) { return words.contains(k); });
    (hit ? out.removed : out.kept).push_back(r);
  }
  return out;
}

}  // namespace cir
