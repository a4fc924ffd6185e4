#include "cir/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cir/error.hpp"

namespace cir {

namespace {

void require_same_dim(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorKind::DimMismatch, std::to_string(a) + " vs " + std::to_string(b));
  }
}

// One normalization step in double, rounded to float.
std::vector<float> scale_to_unit(std::span<const float> v, double norm) {
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = static_cast<float>(static_cast<double>(v[i]) / norm);
  }
  return out;
}

}  // namespace

EmbeddingVector::EmbeddingVector(std::vector<float> components)
    : components_(std::move(components)) {
  if (components_.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "embedding dim must be >= 2");
  }
  for (float x : components_) {
    if (!std::isfinite(x)) throw Error(ErrorKind::NonFinite, "embedding component is not finite");
  }
}

UnitEmbedding UnitEmbedding::from_unit(std::vector<float> unit) {
  if (unit.size() < 2) throw Error(ErrorKind::InvalidArgument, "embedding dim must be >= 2");
  for (float x : unit) {
    if (!std::isfinite(x)) throw Error(ErrorKind::NonFinite, "embedding component is not finite");
  }
  const double n = l2_norm(unit);
  if (std::abs(n - 1.0) > kUnitTolerance) {
    throw Error(ErrorKind::InvalidArgument, "vector is not unit length (norm " + std::to_string(n) + ")");
  }
  return UnitEmbedding(std::move(unit));
}

double dot(std::span<const float> a, std::span<const float> b) {
  require_same_dim(a.size(), b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return acc;
}

double l2_norm(std::span<const float> v) {
  double acc = 0.0;
  for (float x : v) acc += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(acc);
}

constexpr double kIdempotenceBand = 0x1p-23;

UnitEmbedding normalize_span(std::span<const float> v) {
  if (v.size() < 2) throw Error(ErrorKind::InvalidArgument, "embedding dim must be >= 2");
  const double n = l2_norm(v);
  if (!std::isfinite(n)) throw Error(ErrorKind::NonFinite, "norm is not finite");
  if (n <= kZeroNormEpsilon) throw Error(ErrorKind::ZeroVector, "norm below 1e-12");
  // Per-component rounding moves the norm by at most 2^-24 relative, so one
  // scaling pass always lands inside the 2^-23 band and stays there. That
  // makes normalize(normalize(v)) bit-identical without iterating.
  if (std::abs(n - 1.0) <= kIdempotenceBand) return UnitEmbedding(std::vector<float>(v.begin(), v.end()));
  std::vector<float> cur = scale_to_unit(v, n);
  return UnitEmbedding(std::move(cur));
}

UnitEmbedding normalize_span(std::span<const double> v) {
  if (v.size() < 2) throw Error(ErrorKind::InvalidArgument, "embedding dim must be >= 2");
  double acc = 0.0;
  for (double x : v) acc += x * x;
  const double n = std::sqrt(acc);
  if (!std::isfinite(n)) throw Error(ErrorKind::NonFinite, "norm is not finite");
  if (n <= kZeroNormEpsilon) throw Error(ErrorKind::ZeroVector, "norm below 1e-12");
  std::vector<float> once(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) once[i] = static_cast<float>(v[i] / n);
  return normalize_span(std::span<const float>(once));
}

UnitEmbedding normalize(const EmbeddingVector& v) { return normalize_span(v.values()); }
UnitEmbedding normalize(const UnitEmbedding& v) { return normalize_span(v.values()); }

double cosine_sim(const UnitEmbedding& u, const UnitEmbedding& v) {
  return std::clamp(dot(u.values(), v.values()), -1.0, 1.0);
}

double angle_between(const UnitEmbedding& u, const UnitEmbedding& v) {
  require_same_dim(u.dim(), v.dim());
  double diff = 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < u.dim(); ++i) {
    const double a = u[i];
    const double b = v[i];
    diff += (a - b) * (a - b);
    sum += (a + b) * (a + b);
  }
  return 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
}

UnitEmbedding slerp(const UnitEmbedding& a, const UnitEmbedding& b, double alpha) {
  require_same_dim(a.dim(), b.dim());
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "alpha must lie in [0, 1]");
  }
  const double theta = angle_between(a, b);
  if (theta >= std::numbers::pi - kAntipodalMargin) {
    throw Error(ErrorKind::AntipodalVectors, "slerp endpoints are antipodal");
  }
  if (theta < kSlerpLerpThreshold) {
    // Round to float before normalizing: when a == b the mix rounds back to a,
    // which is already a fixed point of normalize, so slerp(a, a) is exactly a.
    std::vector<float> mixed(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) {
      mixed[i] = static_cast<float>(alpha * a[i] + (1.0 - alpha) * b[i]);
    }
    return normalize_span(std::span<const float>(mixed));
  }
  const double s = std::sin(theta);
  const double wa = std::sin(alpha * theta) / s;
  const double wb = std::sin((1.0 - alpha) * theta) / s;
  std::vector<float> out(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) {
    out[i] = static_cast<float>(wa * a[i] + wb * b[i]);
  }
  if (std::abs(l2_norm(out) - 1.0) > UnitEmbedding::kUnitTolerance) {
    return normalize_span(std::span<const float>(out));
  }
  return UnitEmbedding::from_unit(std::move(out));
}

}  // namespace cir
