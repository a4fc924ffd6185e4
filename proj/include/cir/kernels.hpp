#pragma once

#include <span>
#include <vector>

#include "cir/matrix.hpp"

// Similarity kernels. The default versions parallelize over output elements
// with OpenMP; serial:: keeps the straight-line reference used by the tests
// and the benchmark. Every output element is produced by the same sequential
// dot product in both versions, so results are bit-identical for any thread
// count.
namespace cir::kernels {

// gallery.row(r) . query for every row r.
std::vector<double> scores(const EmbeddingMatrix& gallery, std::span<const float> query);

// a.row(i) . b.row(j), row-major a.rows() x b.rows().
std::vector<double> gram(const EmbeddingMatrix& a, const EmbeddingMatrix& b);

// For each row i of a square similarity matrix, the column j != i with the
// largest value (smallest j on ties).
std::vector<std::size_t> argmax_off_diagonal(std::span<const double> sims, std::size_t n);

namespace serial {
std::vector<double> scores(const EmbeddingMatrix& gallery, std::span<const float> query);
std::vector<double> gram(const EmbeddingMatrix& a, const EmbeddingMatrix& b);
std::vector<std::size_t> argmax_off_diagonal(std::span<const double> sims, std::size_t n);
}  // namespace serial

}  // namespace cir::kernels
