#pragma once

#include <algorithm>

#include "trt/common.hpp"

namespace trt {

// Axis-aligned rectangle, lo <= hi componentwise.
struct Rect {
  Vec2 lo{0, 0};
  Vec2 hi{0, 0};

  static Rect centered(const Vec2& center, double half_w, double half_h) {
    return Rect{center - Vec2(half_w, half_h), center + Vec2(half_w, half_h)};
  }
  static Rect square(const Vec2& center, double side) {
    return centered(center, side / 2.0, side / 2.0);
  }

  double width() const { return hi.x() - lo.x(); }
  double height() const { return hi.y() - lo.y(); }
  Vec2 center() const { return 0.5 * (lo + hi); }

  Rect inflated(double r) const { return Rect{lo - Vec2(r, r), hi + Vec2(r, r)}; }

  bool contains(const Vec2& p) const {
    return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y();
  }

  // Strict interior overlap; touching edges do not count.
  bool overlaps(const Rect& o) const {
    return lo.x() < o.hi.x() && o.lo.x() < hi.x() && lo.y() < o.hi.y() && o.lo.y() < hi.y();
  }
};

// Segment a-b against rect, slab test. Touching the boundary counts as a hit.
inline bool segment_hits_rect(const Vec2& a, const Vec2& b, const Rect& r) {
  double t0 = 0.0, t1 = 1.0;
  const Vec2 d = b - a;
  for (int ax = 0; ax < 2; ++ax) {
    if (std::abs(d[ax]) < 1e-15) {
      if (a[ax] < r.lo[ax] || a[ax] > r.hi[ax]) return false;
    } else {
      double ta = (r.lo[ax] - a[ax]) / d[ax];
      double tb = (r.hi[ax] - a[ax]) / d[ax];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return false;
    }
  }
  return true;
}

}  // namespace trt
