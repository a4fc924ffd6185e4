#include "cir/kernels.hpp"

#include <cstdint>

#include "cir/embedding.hpp"
#include "cir/error.hpp"

namespace cir::kernels {

namespace {

void check_dims(std::size_t a, std::size_t b) {
  if (a != b) throw Error(ErrorKind::DimMismatch, "kernel operands disagree on dimension");
}

std::size_t argmax_row(std::span<const double> sims, std::size_t n, std::size_t i) {
  std::size_t best = i == 0 ? 1 : 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) continue;
    if (sims[i * n + j] > sims[i * n + best]) best = j;
  }
  return best;
}

}  // namespace

std::vector<double> scores(const EmbeddingMatrix& gallery, std::span<const float> query) {
  check_dims(gallery.dim(), query.size());
  const auto n = static_cast<std::int64_t>(gallery.rows());
  std::vector<double> out(gallery.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < n; ++r) {
    out[r] = dot(gallery.row(r), query);
  }
  return out;
}

std::vector<double> gram(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  check_dims(a.dim(), b.dim());
  const auto rows = static_cast<std::int64_t>(a.rows());
  const std::size_t cols = b.rows();
  std::vector<double> out(a.rows() * cols);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      out[i * cols + j] = dot(a.row(i), b.row(j));
    }
  }
  return out;
}

std::vector<std::size_t> argmax_off_diagonal(std::span<const double> sims, std::size_t n) {
  if (n < 2) throw Error(ErrorKind::BatchTooSmall, "need at least two rows");
  std::vector<std::size_t> out(n);
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    out[i] = argmax_row(sims, n, static_cast<std::size_t>(i));
  }
  return out;
}

namespace serial {

std::vector<double> scores(const EmbeddingMatrix& gallery, std::span<const float> query) {
  check_dims(gallery.dim(), query.size());
  std::vector<double> out(gallery.rows());
  for (std::size_t r = 0; r < gallery.rows(); ++r) out[r] = dot(gallery.row(r), query);
  return out;
}

std::vector<double> gram(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  check_dims(a.dim(), b.dim());
  std::vector<double> out(a.rows() * b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) out[i * b.rows() + j] = dot(a.row(i), b.row(j));
  }
  return out;
}

std::vector<std::size_t> argmax_off_diagonal(std::span<const double> sims, std::size_t n) {
  if (n < 2) throw Error(ErrorKind::BatchTooSmall, "need at least two rows");
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = argmax_row(sims, n, i);
  return out;
}

}  // namespace serial

}  // namespace cir::kernels
