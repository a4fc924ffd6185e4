#include "cir/embedding_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "cir/error.hpp"
#include "json.hpp"

namespace cir {

namespace {

template <typename T>
void put_le(std::ostream& os, T value) {
  using U = std::conditional_t<sizeof(T) == 2, std::uint16_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
  U bits = std::bit_cast<U>(value);
  std::array<char, sizeof(T)> buf{};
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  os.write(buf.data(), buf.size());
}

template <typename T>
T get_le(std::istream& is) {
  using U = std::conditional_t<sizeof(T) == 2, std::uint16_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
  std::array<unsigned char, sizeof(T)> buf{};
  is.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!is) throw Error(ErrorKind::Format, "truncated embedding file");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(buf[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

}  // namespace

void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  os.write(kEmbeddingMagic, 4);
  put_le<std::uint16_t>(os, kEmbeddingVersion);
  put_le<std::uint64_t>(os, m.rows());
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(m.dim()));
  for (float x : m.data()) put_le<float>(os, x);
  if (!os) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kEmbeddingMagic, 4) != 0) {
    throw Error(ErrorKind::Format, path.string() + ": bad magic");
  }
  const auto version = get_le<std::uint16_t>(is);
  if (version != kEmbeddingVersion) {
    throw Error(ErrorKind::Format, path.string() + ": unsupported version " + std::to_string(version));
  }
  const auto count = get_le<std::uint64_t>(is);
  const auto dim = get_le<std::uint32_t>(is);
  EmbeddingMatrix m(count, dim);
  for (float& x : m.data()) x = get_le<float>(is);
  if (is.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorKind::Format, path.string() + ": trailing bytes after payload");
  }
  return m;
}

std::filesystem::path sibling_jsonl(const std::filesystem::path& embeddings) {
  auto p = embeddings;
  p.replace_extension(".jsonl");
  return p;
}

EmbeddingTable::EmbeddingTable(std::vector<ItemRecord> items, EmbeddingMatrix matrix)
    : items_(std::move(items)), matrix_(std::move(matrix)) {
  if (items_.size() != matrix_.rows()) {
    throw Error(ErrorKind::Format, "metadata has " + std::to_string(items_.size()) + " lines but there are " +
                                       std::to_string(matrix_.rows()) + " embedding rows");
  }
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (items_[i].id.empty()) throw Error(ErrorKind::Format, "empty id on row " + std::to_string(i));
    if (!by_id_.emplace(items_[i].id, i).second) {
      throw Error(ErrorKind::Format, "duplicate id " + items_[i].id);
    }
    auto unit = normalize_span(std::span<const float>(matrix_.row(i)));
    auto v = unit.values();
    std::copy(v.begin(), v.end(), matrix_.row(i).begin());
  }
}

std::optional<std::size_t> EmbeddingTable::find(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::size_t EmbeddingTable::at(const std::string& id) const {
  auto row = find(id);
  if (!row) throw Error(ErrorKind::UnknownId, id);
  return *row;
}

EmbeddingTable read_table(const std::filesystem::path& embeddings) {
  auto matrix = read_embeddings(embeddings);
  const auto meta = sibling_jsonl(embeddings);
  std::ifstream is(meta);
  if (!is) throw Error(ErrorKind::Io, "cannot open " + meta.string());
  std::vector<ItemRecord> items;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Format, meta.string() + ": " + e.what());
    }
    if (!j.contains("id") || !j["id"].is_string()) {
      throw Error(ErrorKind::Format, meta.string() + ": line without string id");
    }
    items.push_back({j["id"].get<std::string>(), j.value("caption", std::string{}),
                     j.value("detailed_caption", std::string{})});
  }
  return EmbeddingTable(std::move(items), std::move(matrix));
}

void write_table(const std::filesystem::path& embeddings, const EmbeddingTable& table) {
  write_embeddings(embeddings, table.matrix());
  std::ofstream os(sibling_jsonl(embeddings), std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot write metadata for " + embeddings.string());
  for (const auto& item : table.items()) {
    nlohmann::json j{{"id", item.id}, {"caption", item.caption}};
    if (!item.detailed_caption.empty()) j["detailed_caption"] = item.detailed_caption;
    os << j.dump() << '\n';
  }
}

}  // namespace cir
