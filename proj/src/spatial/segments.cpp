#include <algorithm>
#include <cmath>

#include "parkcast/spatial/spatial.hpp"

namespace parkcast::spatial {

namespace {

// Separation below which two gates are considered the same loop position.
constexpr double kGateSeparationM = 1e-6;

struct Loop {
  std::vector<GeoPoint> points;  // closed: front() == back()
  std::vector<double> cum;
  double length = 0.0;

  GeoPoint point_at(double s) const {
    const auto it = std::upper_bound(cum.begin(), cum.end(), s);
    std::size_t i = it == cum.begin() ? 0 : static_cast<std::size_t>(it - cum.begin()) - 1;
    i = std::min(i, points.size() - 2);
    const double d = cum[i + 1] - cum[i];
    const double t = d > 0.0 ? (s - cum[i]) / d : 0.0;
    return geo::lerp(points[i], points[i + 1], t);
  }

  // Sub-polyline walking forward from loop position a to b, wrapping past the seam.
  std::vector<GeoPoint> extract(double a, double b) const {
    std::vector<GeoPoint> out;
    auto push = [&](const GeoPoint& p) {
      if (out.empty() || !(out.back() == p)) out.push_back(p);
    };
    push(point_at(a));
    if (b > a) {
      for (std::size_t v = 0; v < points.size(); ++v) {
        if (cum[v] > a && cum[v] < b) push(points[v]);
      }
    } else {
      for (std::size_t v = 0; v < points.size(); ++v) {
        if (cum[v] > a) push(points[v]);
      }
      for (std::size_t v = 1; v < points.size(); ++v) {
        if (cum[v] < b) push(points[v]);
      }
    }
    push(point_at(b));
    return out;
  }
};

Loop make_loop(const std::vector<GeoPoint>& boundary) {
  if (boundary.size() < 4) throw GeometryError("boundary loop needs at least 4 points");
  if (geo::haversine(boundary.front(), boundary.back()) > 1e-3) {
    throw GeometryError("boundary is not a closed loop");
  }
  Loop loop;
  for (const auto& p : boundary) {
    if (loop.points.empty() || !(loop.points.back() == p)) loop.points.push_back(p);
  }
  loop.points.back() = loop.points.front();
  if (loop.points.size() < 4) throw GeometryError("boundary loop is degenerate");
  loop.cum.resize(loop.points.size());
  loop.cum[0] = 0.0;
  for (std::size_t i = 1; i < loop.points.size(); ++i) {
    loop.cum[i] = loop.cum[i - 1] + geo::haversine(loop.points[i - 1], loop.points[i]);
  }
  loop.length = loop.cum.back();
  if (!(loop.length > 0.0)) throw GeometryError("boundary loop has zero length");
  return loop;
}

}  // namespace

std::vector<Segment> segment_roads(const geo::Campus& campus) {
  const Loop loop = make_loop(campus.boundary);
  if (campus.gates.size() < 2) {
    throw GeometryError("segmentation needs at least 2 gates, campus has " +
                        std::to_string(campus.gates.size()));
  }

  struct Placed {
    double s;
    int gate;
  };
  std::vector<Placed> placed;
  for (const auto& g : campus.gates) {
    const auto proj = geo::project_onto_polyline(g.location, loop.points);
    if (proj.distance > campus.gate_snap_threshold_m) {
      throw GeometryError("gate " + std::to_string(g.id) + " is " + std::to_string(proj.distance) +
                          " m off the boundary loop");
    }
    double s = loop.cum[proj.edge] + proj.t * (loop.cum[proj.edge + 1] - loop.cum[proj.edge]);
    if (s >= loop.length) s -= loop.length;
    placed.push_back({s, g.id});
  }
  std::sort(placed.begin(), placed.end(), [](const Placed& a, const Placed& b) {
    return a.s < b.s || (a.s == b.s && a.gate < b.gate);
  });

  const std::size_t n = placed.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Placed& a = placed[i];
    const Placed& b = placed[(i + 1) % n];
    double gap = b.s - a.s;
    if (i + 1 == n) gap += loop.length;
    if (gap <= kGateSeparationM) {
      throw DegenerateGateError("gates " + std::to_string(a.gate) + " and " + std::to_string(b.gate) +
                                " project to the same boundary position");
    }
  }

  std::vector<Segment> segments;
  segments.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Placed& end = placed[i];
    const Placed& start = placed[(i + n - 1) % n];
    Segment seg;
    seg.id = end.gate;
    seg.start_gate = start.gate;
    seg.end_gate = end.gate;
    seg.polyline = loop.extract(start.s, end.s);
    seg.cumulative.resize(seg.polyline.size());
    seg.cumulative[0] = 0.0;
    for (std::size_t v = 1; v < seg.polyline.size(); ++v) {
      seg.cumulative[v] = seg.cumulative[v - 1] + geo::haversine(seg.polyline[v - 1], seg.polyline[v]);
    }
    seg.length = seg.cumulative.back();
    segments.push_back(std::move(seg));
  }
  std::sort(segments.begin(), segments.end(),
            [](const Segment& a, const Segment& b) { return a.id < b.id; });
  return segments;
}

int expected_gate(std::span<const Segment> segments, int segment_id) {
  for (const auto& s : segments) {
    if (s.id == segment_id) return s.end_gate;
  }
  throw LookupError("unknown segment " + std::to_string(segment_id));
}

}  // namespace parkcast::spatial
