#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "parkcast/common/time.hpp"
#include "parkcast/geodata/campus.hpp"

namespace parkcast::spatial {

using geo::GeoPoint;

constexpr double kDefaultSnapThresholdM = 30.0;

// Stretch of the boundary loop between two consecutive gates. Segment k ends
// at gate k, so a vehicle on it is expected to enter gate k.
struct Segment {
  int id = 0;
  std::vector<GeoPoint> polyline;
  int start_gate = 0;
  int end_gate = 0;
  double length = 0.0;             // meters
  std::vector<double> cumulative;  // arc length at each polyline vertex
};

// Splits the closed boundary loop at the gates' projections. Throws
// GeometryError for an open loop, fewer than two gates or a gate off the loop,
// and DegenerateGateError when two gates land on the same loop position.
std::vector<Segment> segment_roads(const geo::Campus& campus);

struct Snap {
  int segment_id = 0;
  double offset = 0.0;    // meters from the segment start to the projected point
  double distance = 0.0;  // meters from the point to the projected point
};

// Nearest segment regardless of distance. Ties go to the lowest segment id.
// Requires at least one segment.
Snap nearest_segment(const GeoPoint& p, std::span<const Segment> segments);

// nearest_segment() when within `threshold_m`, else nullopt.
// Throws ArgumentError unless threshold_m > 0.
std::optional<Snap> snap_to_segment(const GeoPoint& p, std::span<const Segment> segments,
                                    double threshold_m);

// Containment in lon/lat space; points on a ring count as inside. Throws
// AmbiguityError when more than one section contains the point.
std::optional<int> point_in_section(const GeoPoint& p, std::span<const geo::ParkingSection> sections);

// Terminal gate of a segment. Throws LookupError for unknown ids.
int expected_gate(std::span<const Segment> segments, int segment_id);

struct VehicleObservation {
  std::string vehicle_key;
  GeoPoint point;
  Timestamp timestamp;
  std::optional<double> speed_kmh;

  friend bool operator==(const VehicleObservation&, const VehicleObservation&) = default;
};

struct JoinedObservation {
  VehicleObservation observation;
  std::optional<int> segment_id;  // present iff snap_distance <= threshold
  double offset = 0.0;
  double snap_distance = 0.0;     // distance to the nearest segment, snapped or not
  std::optional<int> section_id;
  std::optional<int> expected_gate;

  friend bool operator==(const JoinedObservation&, const JoinedObservation&) = default;
};

// Annotates every observation; output order equals input order.
std::vector<JoinedObservation> spatial_join(std::span<const VehicleObservation> observations,
                                            std::span<const Segment> segments,
                                            std::span<const geo::ParkingSection> sections,
                                            double threshold_m);

std::vector<JoinedObservation> spatial_join(std::span<const VehicleObservation> observations,
                                            const geo::Campus& campus, double threshold_m);

// --- CSV: vehicle_key,lon,lat,timestamp_iso8601,speed_kmh -------------------

struct RowError {
  std::size_t row = 0;  // zero-based data row index
  std::string message;
};

struct ObservationParse {
  std::vector<VehicleObservation> observations;
  std::vector<RowError> errors;
};

// Parses rows individually; malformed rows land in `errors`.
ObservationParse parse_observations_csv(std::string_view text);

// Throws ValidationError listing every malformed row.
std::vector<VehicleObservation> read_observations_csv(std::string_view text);

std::string write_observations_csv(std::span<const VehicleObservation> observations);

// Row validation shared by the CSV reader and the service's JSON ingest.
std::optional<std::string> check_observation(const VehicleObservation& obs);

std::string write_joined_csv(std::span<const JoinedObservation> joined);
std::vector<JoinedObservation> read_joined_csv(std::string_view text);

}  // namespace parkcast::spatial
