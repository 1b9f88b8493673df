#include <algorithm>
#include <cmath>

#include "parkcast/spatial/spatial.hpp"

namespace parkcast::spatial {

namespace {

struct Box {
  double min_lon, min_lat, max_lon, max_lat;
};

Box bounds(std::span<const GeoPoint> pts) {
  Box b{pts[0].lon, pts[0].lat, pts[0].lon, pts[0].lat};
  for (const auto& p : pts) {
    b.min_lon = std::min(b.min_lon, p.lon);
    b.max_lon = std::max(b.max_lon, p.lon);
    b.min_lat = std::min(b.min_lat, p.lat);
    b.max_lat = std::max(b.max_lat, p.lat);
  }
  return b;
}

// Lower bound (meters, local plane) on the distance from p to anything in box.
double box_distance(const GeoPoint& p, const Box& b) {
  const double dlon = std::max({b.min_lon - p.lon, 0.0, p.lon - b.max_lon});
  const double dlat = std::max({b.min_lat - p.lat, 0.0, p.lat - b.max_lat});
  const double k = geo::kEarthRadiusM * geo::kDegToRad;
  const double x = dlon * std::cos(p.lat * geo::kDegToRad) * k;
  const double y = dlat * k;
  return std::sqrt(x * x + y * y);
}

bool on_edge(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b) {
  const double ex = b.lon - a.lon, ey = b.lat - a.lat;
  const double px = p.lon - a.lon, py = p.lat - a.lat;
  const double len2 = ex * ex + ey * ey;
  if (len2 == 0.0) return px == 0.0 && py == 0.0;
  const double cross = ex * py - ey * px;
  if (std::abs(cross) > 1e-12 * len2) return false;
  const double dot = ex * px + ey * py;
  return dot >= -1e-12 * len2 && dot <= len2 * (1.0 + 1e-12);
}

bool ring_contains(const GeoPoint& p, std::span<const GeoPoint> ring) {
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (on_edge(p, ring[i], ring[i + 1])) return true;
  }
  if (n > 0 && !(ring.front() == ring.back()) && on_edge(p, ring.back(), ring.front())) return true;

  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const GeoPoint& a = ring[i];
    const GeoPoint& b = ring[j];
    if ((a.lat > p.lat) != (b.lat > p.lat)) {
      const double x = (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon;
      if (p.lon < x) inside = !inside;
    }
  }
  return inside;
}

}  // namespace

Snap nearest_segment(const GeoPoint& p, std::span<const Segment> segments) {
  if (segments.empty()) throw ArgumentError("no segments to snap to");
  Snap best;
  bool have = false;
  for (const auto& seg : segments) {
    // The bound is planar and therefore approximate; keep a safety margin so
    // pruning never discards a segment that could win.
    if (have && box_distance(p, bounds(seg.polyline)) * 0.99 > best.distance) continue;
    const auto proj = geo::project_onto_polyline(p, seg.polyline);
    if (!have || proj.distance < best.distance ||
        (proj.distance == best.distance && seg.id < best.segment_id)) {
      const double a = seg.cumulative[proj.edge];
      const double b = seg.cumulative[proj.edge + 1];
      best.segment_id = seg.id;
      best.offset = std::clamp(a + proj.t * (b - a), 0.0, seg.length);
      best.distance = proj.distance;
      have = true;
    }
  }
  return best;
}

std::optional<Snap> snap_to_segment(const GeoPoint& p, std::span<const Segment> segments,
                                    double threshold_m) {
  if (!(threshold_m > 0.0)) throw ArgumentError("snap threshold must be positive");
  const Snap s = nearest_segment(p, segments);
  if (s.distance <= threshold_m) return s;
  return std::nullopt;
}

std::optional<int> point_in_section(const GeoPoint& p, std::span<const geo::ParkingSection> sections) {
  std::vector<int> hits;
  for (const auto& s : sections) {
    if (s.ring.size() < 3) continue;
    const Box b = bounds(s.ring);
    if (p.lon < b.min_lon || p.lon > b.max_lon || p.lat < b.min_lat || p.lat > b.max_lat) continue;
    if (ring_contains(p, s.ring)) hits.push_back(s.id);
  }
  if (hits.empty()) return std::nullopt;
  if (hits.size() > 1) throw AmbiguityError("point lies in overlapping sections", hits);
  return hits.front();
}

std::vector<JoinedObservation> spatial_join(std::span<const VehicleObservation> observations,
                                            std::span<const Segment> segments,
                                            std::span<const geo::ParkingSection> sections,
                                            double threshold_m) {
  if (!(threshold_m > 0.0)) throw ArgumentError("snap threshold must be positive");
  std::vector<JoinedObservation> out;
  out.reserve(observations.size());
  for (const auto& obs : observations) {
    JoinedObservation j;
    j.observation = obs;
    if (!segments.empty()) {
      const Snap s = nearest_segment(obs.point, segments);
      j.snap_distance = s.distance;
      if (s.distance <= threshold_m) {
        j.segment_id = s.segment_id;
        j.offset = s.offset;
        j.expected_gate = expected_gate(segments, s.segment_id);
      }
    }
    j.section_id = point_in_section(obs.point, sections);
    out.push_back(std::move(j));
  }
  return out;
}

std::vector<JoinedObservation> spatial_join(std::span<const VehicleObservation> observations,
                                            const geo::Campus& campus, double threshold_m) {
  const auto segments = segment_roads(campus);
  return spatial_join(observations, segments, campus.sections, threshold_m);
}

}  // namespace parkcast::spatial
