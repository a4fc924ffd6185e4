#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cir/embedding.hpp"

namespace cir {

// Row-major float32 matrix of embeddings; one row per item.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t rows, std::size_t dim) : rows_(rows), dim_(dim), data_(rows * dim) {}

  static EmbeddingMatrix from_rows(std::span<const UnitEmbedding> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }

  std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::span<float> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  // Row i as a UnitEmbedding; throws if the row is not unit length.
  UnitEmbedding unit_row(std::size_t i) const;

  void append(std::span<const float> row);

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
};

}  // namespace cir
