#include "parkcast/geodata/geo.hpp"

#include <algorithm>
#include <cmath>

#include "parkcast/common/error.hpp"

namespace parkcast::geo {

bool GeoPoint::valid() const noexcept {
  return std::isfinite(lon) && std::isfinite(lat) && lon >= -180.0 && lon <= 180.0 &&
         lat >= -90.0 && lat <= 90.0;
}

double haversine(const GeoPoint& a, const GeoPoint& b) noexcept {
  const double phi1 = a.lat * kDegToRad;
  const double phi2 = b.lat * kDegToRad;
  const double dphi = (b.lat - a.lat) * kDegToRad;
  const double dlambda = (b.lon - a.lon) * kDegToRad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

double polyline_length(std::span<const GeoPoint> polyline) noexcept {
  double total = 0.0;
  for (std::size_t i = 1; i < polyline.size(); ++i) total += haversine(polyline[i - 1], polyline[i]);
  return total;
}

GeoPoint lerp(const GeoPoint& a, const GeoPoint& b, double t) noexcept {
  if (t <= 0.0) return a;
  if (t >= 1.0) return b;
  return {a.lon + (b.lon - a.lon) * t, a.lat + (b.lat - a.lat) * t};
}

Projection project_onto_edge(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b) noexcept {
  const double kx = std::cos(p.lat * kDegToRad);
  const double ax = (a.lon - p.lon) * kx, ay = a.lat - p.lat;
  const double bx = (b.lon - p.lon) * kx, by = b.lat - p.lat;
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(-(ax * dx + ay * dy) / len2, 0.0, 1.0);
  Projection out;
  out.t = t;
  out.point = lerp(a, b, t);
  out.distance = haversine(p, out.point);
  return out;
}

Projection project_onto_polyline(const GeoPoint& p, std::span<const GeoPoint> polyline) {
  if (polyline.size() < 2) throw GeometryError("polyline needs at least two points");
  Projection best;
  bool have = false;
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
    Projection cur = project_onto_edge(p, polyline[i], polyline[i + 1]);
    if (!have || cur.distance < best.distance) {
      cur.edge = i;
      best = cur;
      have = true;
    }
  }
  return best;
}

}  // namespace parkcast::geo
