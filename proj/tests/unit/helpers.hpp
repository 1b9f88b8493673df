#pragma once

#include "parkcast/spatial/spatial.hpp"

namespace testing {

// Point at a fraction of a segment's arc length.
inline parkcast::geo::GeoPoint at_fraction(const parkcast::spatial::Segment& s, double frac) {
  const double target = frac * s.length;
  std::size_t k = 1;
  while (k + 1 < s.cumulative.size() && s.cumulative[k] < target) ++k;
  const double t = (target - s.cumulative[k - 1]) / (s.cumulative[k] - s.cumulative[k - 1]);
  return parkcast::geo::lerp(s.polyline[k - 1], s.polyline[k], t);
}

}  // namespace testing
