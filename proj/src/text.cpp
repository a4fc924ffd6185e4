#include "cir/text.hpp"

#include <cctype>
#include <cmath>
#include <map>

#include "cir/error.hpp"
#include "cir/random.hpp"

namespace cir {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c) || std::ispunct(c)) {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

TextFeaturizer::TextFeaturizer(std::size_t vocab_buckets) : vocab_buckets_(vocab_buckets) {
  if (vocab_buckets_ == 0) throw Error(ErrorKind::InvalidArgument, "vocab_buckets must be positive");
}

std::uint32_t TextFeaturizer::bucket(std::string_view token) const {
  return static_cast<std::uint32_t>(fnv1a64(token) % vocab_buckets_);
}

SparseFeatures TextFeaturizer::sparse(std::string_view text) const {
  std::map<std::uint32_t, double> counts;
  for (const auto& tok : tokenize(text)) counts[bucket(tok)] += 1.0;
  SparseFeatures out;
  if (counts.empty()) return out;
  double sq = 0.0;
  for (const auto& [b, c] : counts) sq += c * c;
  const double norm = std::sqrt(sq);
  out.entries.reserve(counts.size());
  for (const auto& [b, c] : counts) out.entries.emplace_back(b, c / norm);
  return out;
}

std::vector<double> TextFeaturizer::dense(std::string_view text) const {
  std::vector<double> out(vocab_buckets_, 0.0);
  for (const auto& [b, v] : sparse(text).entries) out[b] = v;
  return out;
}

std::vector<double> featurize_text(std::string_view text, std::size_t vocab_buckets) {
  return TextFeaturizer(vocab_buckets).dense(text);
}

std::string assemble_instruction(bool has_image, const std::optional<std::string>& text) {
  if (!has_image && !text) throw Error(ErrorKind::EmptyQuery, "query has neither image nor text");
  std::string out = "Instruct: Find the image that matches the query.\nQuery:\n";
  if (has_image) out += "Image: <image>\n";
  if (text) out += "Text: " + *text + "\n";
  return out;
}

}  // namespace cir
