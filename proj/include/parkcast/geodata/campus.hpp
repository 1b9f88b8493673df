#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "parkcast/common/error.hpp"
#include "parkcast/geodata/geo.hpp"

namespace parkcast::geo {

struct RoadEdge {
  std::int64_t from = 0;
  std::int64_t to = 0;
  std::vector<GeoPoint> polyline;
  double length = 0.0;  // meters
  std::string name;
};

struct RoadNetwork {
  std::map<std::int64_t, GeoPoint> nodes;
  std::vector<RoadEdge> edges;
};

struct Gate {
  int id = 0;  // 1..G
  GeoPoint location;
  std::string name;
  // Sections this gate serves, in preference order. Empty means every section.
  std::vector<int> sections;
};

struct ParkingSection {
  int id = 0;
  std::vector<GeoPoint> ring;  // closed: front() == back()
  int capacity = 0;
  std::string name;
};

constexpr double kDefaultGateSnapThresholdM = 30.0;

// Immutable once built; share freely between readers.
struct Campus {
  RoadNetwork network;
  std::vector<Gate> gates;
  std::vector<ParkingSection> sections;
  std::vector<GeoPoint> boundary;  // perimeter road the gates sit on
  std::optional<int> declared_total_capacity;
  double gate_snap_threshold_m = kDefaultGateSnapThresholdM;

  int total_capacity() const;
  const Gate* find_gate(int id) const;
  const ParkingSection* find_section(int id) const;
  // Resolved gate -> section list (the gate's own list, or every section id
  // ascending when the gate lists none). Throws LookupError for unknown gates.
  std::vector<int> sections_for_gate(int gate_id) const;
  // First entry of sections_for_gate(); the section a gate's flows are booked against.
  int home_section(int gate_id) const;
};

// Every broken invariant, each naming the field and rule. Empty iff valid.
std::vector<Violation> validate_campus(const Campus& campus);

// Parses a GeoJSON FeatureCollection whose features carry a `kind` property in
// {road, boundary, gate, parking}. Throws ParseError, SchemaError, or
// ValidationError (carrying the validate_campus() list).
Campus load_campus(std::string_view geojson);

// GeoJSON FeatureCollection; coordinates rounded to 1e-9 degrees.
std::string to_geojson(const Campus& campus);

}  // namespace parkcast::geo
