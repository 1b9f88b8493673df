#pragma once

#include <cstddef>
#include <span>

namespace parkcast::geo {

// Spherical Earth; campus-scale distances are well inside its accuracy.
constexpr double kEarthRadiusM = 6371008.8;
constexpr double kPi = 3.14159265358979323846;
constexpr double kDegToRad = kPi / 180.0;

struct GeoPoint {
  double lon = 0.0;  // degrees, [-180, 180]
  double lat = 0.0;  // degrees, [-90, 90]

  bool valid() const noexcept;
  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

// Great-circle distance in meters.
double haversine(const GeoPoint& a, const GeoPoint& b) noexcept;

// Sum of haversine distances between consecutive points.
double polyline_length(std::span<const GeoPoint> polyline) noexcept;

// Linear interpolation in lon/lat space, t in [0, 1].
GeoPoint lerp(const GeoPoint& a, const GeoPoint& b, double t) noexcept;

// Closest point of a polyline to `p`, measured in a local equirectangular
// plane centred on `p`'s latitude; `distance` is the haversine distance from
// `p` to the projected point. Ties go to the lowest edge index.
struct Projection {
  std::size_t edge = 0;   // polyline[edge] -> polyline[edge + 1]
  double t = 0.0;         // fraction along that edge
  GeoPoint point;
  double distance = 0.0;  // meters
};

// Clamped projection onto one edge.
Projection project_onto_edge(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b) noexcept;

// Requires at least two points.
Projection project_onto_polyline(const GeoPoint& p, std::span<const GeoPoint> polyline);

}  // namespace parkcast::geo
