#include "cir/matrix.hpp"

#include <string>

#include "cir/error.hpp"

namespace cir {

EmbeddingMatrix EmbeddingMatrix::from_rows(std::span<const UnitEmbedding> rows) {
  if (rows.empty()) return {};
  EmbeddingMatrix m(rows.size(), rows.front().dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].dim() != m.dim_) {
      throw Error(ErrorKind::DimMismatch, "row " + std::to_string(i) + " has a different dimension");
    }
    auto src = rows[i].values();
    std::copy(src.begin(), src.end(), m.row(i).begin());
  }
  return m;
}

UnitEmbedding EmbeddingMatrix::unit_row(std::size_t i) const {
  auto r = row(i);
  return UnitEmbedding::from_unit(std::vector<float>(r.begin(), r.end()));
}

void EmbeddingMatrix::append(std::span<const float> r) {
  if (rows_ == 0 && dim_ == 0) dim_ = r.size();
  if (r.size() != dim_) throw Error(ErrorKind::DimMismatch, "appended row has a different dimension");
  data_.insert(data_.end(), r.begin(), r.end());
  ++rows_;
}

}  // namespace cir
