#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cir/matrix.hpp"

namespace cir {

// Binary embedding file:
//   "CIRF" | version u16 | count u64 | dim u32 | count*dim float32, row-major
// All integers and floats little-endian.
inline constexpr char kEmbeddingMagic[4] = {'C', 'I', 'R', 'F'};
inline constexpr std::uint16_t kEmbeddingVersion = 1;

void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m);
EmbeddingMatrix read_embeddings(const std::filesystem::path& path);

// Sibling metadata file: same stem, ".jsonl" extension, one object per row.
std::filesystem::path sibling_jsonl(const std::filesystem::path& embeddings);

struct ItemRecord {
  std::string id;
  std::string caption;
  std::string detailed_caption;
};

// Embeddings plus their line-aligned metadata. Rows are unit-normalized on
// load; ids are unique.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<ItemRecord> items, EmbeddingMatrix matrix);

  std::size_t size() const noexcept { return items_.size(); }
  std::size_t dim() const noexcept { return matrix_.dim(); }
  const std::vector<ItemRecord>& items() const noexcept { return items_; }
  const EmbeddingMatrix& matrix() const noexcept { return matrix_; }

  std::optional<std::size_t> find(const std::string& id) const;
  // Throws UnknownId when absent.
  std::size_t at(const std::string& id) const;
  UnitEmbedding embedding(std::size_t row) const { return matrix_.unit_row(row); }

 private:
  std::vector<ItemRecord> items_;
  EmbeddingMatrix matrix_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

EmbeddingTable read_table(const std::filesystem::path& embeddings);
void write_table(const std::filesystem::path& embeddings, const EmbeddingTable& table);

}  // namespace cir
