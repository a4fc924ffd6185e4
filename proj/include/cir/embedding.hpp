#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cir {

// Raw encoder output. Components are finite and dim >= 2.
class EmbeddingVector {
 public:
  explicit EmbeddingVector(std::vector<float> components);

  std::size_t dim() const noexcept { return components_.size(); }
  std::span<const float> values() const noexcept { return components_; }
  float operator[](std::size_t i) const { return components_[i]; }

 private:
  std::vector<float> components_;
};

// Unit-L2 embedding, stored in 32-bit floats. Only constructible through
// normalize() or from_unit(), both of which enforce |norm - 1| <= kUnitTolerance.
class UnitEmbedding {
 public:
  static constexpr double kUnitTolerance = 1e-6;

  UnitEmbedding() = default;

  // Wraps components that are already unit length; throws InvalidArgument
  // otherwise. No rescaling happens, so the stored bits are exactly `unit`.
  static UnitEmbedding from_unit(std::vector<float> unit);

  std::size_t dim() const noexcept { return components_.size(); }
  bool empty() const noexcept { return components_.empty(); }
  std::span<const float> values() const noexcept { return components_; }
  float operator[](std::size_t i) const { return components_[i]; }

  friend bool operator==(const UnitEmbedding&, const UnitEmbedding&) = default;

 private:
  explicit UnitEmbedding(std::vector<float> c) : components_(std::move(c)) {}
  friend UnitEmbedding normalize_span(std::span<const float>);
  friend UnitEmbedding normalize_span(std::span<const double>);

  std::vector<float> components_;
};

inline constexpr double kZeroNormEpsilon = 1e-12;
inline constexpr double kSlerpLerpThreshold = 1e-6;
inline constexpr double kAntipodalMargin = 1e-6;

double l2_norm(std::span<const float> v);
double dot(std::span<const float> a, std::span<const float> b);

UnitEmbedding normalize(const EmbeddingVector& v);
UnitEmbedding normalize(const UnitEmbedding& v);
UnitEmbedding normalize_span(std::span<const float> v);
UnitEmbedding normalize_span(std::span<const double> v);

// u . v, clamped to [-1, 1].
double cosine_sim(const UnitEmbedding& u, const UnitEmbedding& v);

// Angle between two unit embeddings via 2*atan2(|u-v|, |u+v|). Agrees with
// arccos(u.v) but keeps full precision near 0 and pi.
double angle_between(const UnitEmbedding& u, const UnitEmbedding& v);

// Spherical interpolation with the weight convention
//   [sin(alpha*theta) a + sin((1-alpha)*theta) b] / sin(theta)
// so alpha = 1 returns a and alpha = 0 returns b. Falls back to
// normalize(alpha*a + (1-alpha)*b) when theta < kSlerpLerpThreshold and throws
// AntipodalVectors when theta >= pi - kAntipodalMargin.
UnitEmbedding slerp(const UnitEmbedding& a, const UnitEmbedding& b, double alpha);

}  // namespace cir
