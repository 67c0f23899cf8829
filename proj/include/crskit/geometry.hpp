#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "crskit/errors.hpp"

namespace crskit {

// Axis-aligned box in continuous corner coordinates. Valid boxes have
// x2 > x1 and y2 > y1; the free functions below check this and throw
// InvalidGeometry otherwise.
template <typename Scalar>
struct BoxT {
  Scalar x1{};
  Scalar y1{};
  Scalar x2{};
  Scalar y2{};

  Scalar width() const { return x2 - x1; }
  Scalar height() const { return y2 - y1; }
  Scalar center_x() const { return (x1 + x2) / Scalar(2); }
  Scalar center_y() const { return (y1 + y2) / Scalar(2); }

  BoxT translated(Scalar dx, Scalar dy) const { return {x1 + dx, y1 + dy, x2 + dx, y2 + dy}; }
  BoxT scaled(Scalar s) const { return {x1 * s, y1 * s, x2 * s, y2 * s}; }

  friend bool operator==(const BoxT&, const BoxT&) = default;
};

using Box = BoxT<double>;

namespace geometry {

namespace detail {
inline std::atomic<bool> voc_plus_one{false};
}  // namespace detail

/// VOC pixel convention: extents are measured as (x2 - x1 + 1). Off by default.
inline bool voc_plus_one() { return detail::voc_plus_one.load(std::memory_order_relaxed); }
inline void set_voc_plus_one(bool enabled) { detail::voc_plus_one.store(enabled, std::memory_order_relaxed); }

/// RAII toggle for the pixel convention; restores the previous setting.
class ScopedVocPlusOne {
 public:
  explicit ScopedVocPlusOne(bool enabled) : previous_(voc_plus_one()) { set_voc_plus_one(enabled); }
  ~ScopedVocPlusOne() { set_voc_plus_one(previous_); }
  ScopedVocPlusOne(const ScopedVocPlusOne&) = delete;
  ScopedVocPlusOne& operator=(const ScopedVocPlusOne&) = delete;

 private:
  bool previous_;
};

template <typename Scalar>
Scalar pixel_offset() {
  return voc_plus_one() ? Scalar(1) : Scalar(0);
}

}  // namespace geometry

template <typename Scalar>
bool is_valid(const BoxT<Scalar>& b) {
  return std::isfinite(b.x1) && std::isfinite(b.y1) && std::isfinite(b.x2) && std::isfinite(b.y2) &&
         b.x2 > b.x1 && b.y2 > b.y1;
}

template <typename Scalar>
void validate(const BoxT<Scalar>& b) {
  if (!is_valid(b)) {
    std::ostringstream os;
    os << "invalid box [" << b.x1 << ", " << b.y1 << ", " << b.x2 << ", " << b.y2
       << "]: requires x2 > x1 and y2 > y1";
    throw InvalidGeometry(os.str());
  }
}

template <typename Scalar>
Scalar area(const BoxT<Scalar>& b) {
  validate(b);
  const Scalar off = geometry::pixel_offset<Scalar>();
  return (b.x2 - b.x1 + off) * (b.y2 - b.y1 + off);
}

/// Overlap rectangle area; zero for disjoint boxes and for boxes that only
/// share an edge.
template <typename Scalar>
Scalar intersection_area(const BoxT<Scalar>& a, const BoxT<Scalar>& b) {
  validate(a);
  validate(b);
  const Scalar off = geometry::pixel_offset<Scalar>();
  const Scalar w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1) + off;
  const Scalar h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1) + off;
  if (w <= Scalar(0) || h <= Scalar(0)) return Scalar(0);
  return w * h;
}

template <typename Scalar>
Scalar iou(const BoxT<Scalar>& a, const BoxT<Scalar>& b) {
  const Scalar inter = intersection_area(a, b);
  const Scalar uni = area(a) + area(b) - inter;
  return std::clamp(inter / uni, Scalar(0), Scalar(1));
}

/// Fraction of `candidate` covered by `selected`: area(selected ∩ candidate) /
/// area(candidate). Argument order matters; a candidate nested inside the
/// selected box scores 1 however small it is.
template <typename Scalar>
Scalar asymmetric_overlap(const BoxT<Scalar>& selected, const BoxT<Scalar>& candidate) {
  const Scalar inter = intersection_area(selected, candidate);
  return std::clamp(inter / area(candidate), Scalar(0), Scalar(1));
}

/// Closed containment of a point (boundary counts as inside).
template <typename Scalar>
bool contains_point(const BoxT<Scalar>& b, Scalar x, Scalar y) {
  return x >= b.x1 && x <= b.x2 && y >= b.y1 && y <= b.y2;
}

template <typename Scalar>
bool contains(const BoxT<Scalar>& outer, const BoxT<Scalar>& inner) {
  return inner.x1 >= outer.x1 && inner.y1 >= outer.y1 && inner.x2 <= outer.x2 && inner.y2 <= outer.y2;
}

/// Smallest box enclosing both arguments.
template <typename Scalar>
BoxT<Scalar> hull(const BoxT<Scalar>& a, const BoxT<Scalar>& b) {
  return {std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2), std::max(a.y2, b.y2)};
}

}  // namespace crskit
