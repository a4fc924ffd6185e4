#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cir/embedding_io.hpp"
#include "cir/error.hpp"

namespace cir {

struct PairingConfig {
  double low = 0.5;
  double high = 0.95;
  double interval = 0.03;
  std::size_t group_size = 6;

  void validate() const;
};

struct PairGroup {
  std::vector<std::string> member_ids;   // first element is the seed
  std::vector<double> seed_similarity;   // cosine to the seed; 1.0 for the seed itself
};

// Greedy grouping. Seeds are visited in id order; a candidate joins when its
// similarity to the seed is in [low, high] and differs by at least `interval`
// from the similarity of every member accepted so far. Incomplete groups are
// dropped; an image belongs to at most one group.
std::vector<PairGroup> build_groups(const EmbeddingTable& records, const PairingConfig& cfg = {});

// Consecutive pairs plus seed-to-member pairs, deduplicated, in that order.
std::vector<std::pair<std::string, std::string>> pairs_from_group(const PairGroup& group);

enum class ModificationCategory {
  AttributeChange,
  AddedObject,
  RemovedObject,
  RelationshipChange,
  ViewpointChange,
  NumberChange,
};

inline constexpr std::array<ModificationCategory, 6> kAllCategories = {
    ModificationCategory::AttributeChange,    ModificationCategory::AddedObject,
    ModificationCategory::RemovedObject,      ModificationCategory::RelationshipChange,
    ModificationCategory::ViewpointChange,    ModificationCategory::NumberChange,
};

std::string_view to_string(ModificationCategory c);
std::optional<ModificationCategory> parse_category(std::string_view id);

enum class Direction { Forward, Backward };
std::string_view to_string(Direction d);

inline constexpr std::size_t kMaxModificationWords = 20;

struct ModificationRecord {
  std::string ref_id;
  std::string tgt_id;
  Direction direction = Direction::Forward;
  ModificationCategory category = ModificationCategory::AttributeChange;
  std::string text;
};

struct CategoryDefinition {
  ModificationCategory category;
  std::string definition;
};

// In-context example for one category.
struct CategoryExample {
  ModificationCategory category;
  std::string caption1;
  std::string caption2;
  std::string forward;
  std::string backward;
};

const std::vector<CategoryDefinition>& default_category_definitions();
const std::vector<CategoryExample>& default_category_examples();

extern const char* const kGenerationSystemPrompt;

// Fills the generation prompt skeleton. Examples are emitted under their
// category; the bad-example block is omitted when `bad_examples` is empty.
// Throws InvalidArgument unless `category_defs` covers all six categories.
std::string assemble_generation_prompt(std::string_view caption1, std::string_view caption2,
                                       const std::vector<CategoryDefinition>& category_defs,
                                       const std::vector<CategoryExample>& good_examples,
                                       const std::vector<std::string>& bad_examples);

struct RejectedEntry {
  Direction direction;
  std::size_t position;  // index within its direction list
  ErrorKind reason;      // UnknownCategory, OverlongText or MalformedResponse
  std::string detail;
};

struct ParsedResponse {
  std::vector<ModificationRecord> records;
  std::vector<RejectedEntry> rejected;
};

// Parses {"forward": [{category, text}...], "backward": [...]}. Text around
// the outermost braces is ignored. Throws MalformedResponse when no JSON
// object with either list can be found; bad entries are rejected, not fatal.
ParsedResponse parse_generation_response(std::string_view raw, const std::string& ref_id = {},
                                         const std::string& tgt_id = {});

std::size_t word_count(std::string_view text);

inline const std::vector<std::string> kDefaultBiometricKeywords = {"skin", "hair", "gender", "age", "race"};

struct FilterResult {
  std::vector<ModificationRecord> kept;
  std::vector<ModificationRecord> removed;
};

// Removes records whose text contains any keyword as a whole word (ASCII
// case-insensitive).
FilterResult biometric_filter(const std::vector<ModificationRecord>& records,
                              const std::vector<std::string>& keywords = kDefaultBiometricKeywords);

}  // namespace cir
