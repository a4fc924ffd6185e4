#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cir {

inline constexpr std::size_t kDefaultVocabBuckets = 4096;

// Sparse L2-normalized bucket counts, sorted by bucket.
struct SparseFeatures {
  std::vector<std::pair<std::uint32_t, double>> entries;
  bool empty() const noexcept { return entries.empty(); }
};

// Lowercased tokens split on whitespace and ASCII punctuation.
std::vector<std::string> tokenize(std::string_view text);

// Hashed bag-of-tokens (FNV-1a, 64 bit, modulo vocab_buckets).
class TextFeaturizer {
 public:
  explicit TextFeaturizer(std::size_t vocab_buckets = kDefaultVocabBuckets);

  std::size_t vocab_buckets() const noexcept { return vocab_buckets_; }
  std::uint32_t bucket(std::string_view token) const;

  SparseFeatures sparse(std::string_view text) const;
  // Dense view; the empty string (or any text without tokens) maps to zeros.
  std::vector<double> dense(std::string_view text) const;

 private:
  std::size_t vocab_buckets_;
};

std::vector<double> featurize_text(std::string_view text, std::size_t vocab_buckets = kDefaultVocabBuckets);

// Retrieval instruction wrapped around a query. The Image line carries an
// <image> placeholder for the adapter output; lines for absent modalities are
// dropped. Throws EmptyQuery when neither modality is present.
std::string assemble_instruction(bool has_image, const std::optional<std::string>& text);

}  // namespace cir
