#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "parkcast/common/time.hpp"
#include "parkcast/geodata/campus.hpp"
#include "parkcast/spatial/spatial.hpp"

namespace parkcast::features {

// One (hour bucket, segment) observation of the modelling dataset.
struct FeatureRow {
  double distance = 0.0;      // meters, snap point to expected gate along the segment
  Timestamp timestamp;        // hour bucket start
  double travel_speed = 0.0;  // km/h
  int n_vehicles = 0;         // influx
  int n_vehicles_exit = 0;    // outflux
  int segment_no = 0;         // 1..G
  int total_parking_space = 0;
  std::optional<double> availability;  // [0,1]; missing before cleaning

  friend bool operator==(const FeatureRow&, const FeatureRow&) = default;
};

// Daily study hours repeated over calendar days: every hour bucket [h, h+1)
// whose hour-of-day lies in [hour(start), hour(end)) on each day from
// start's day to end's day. 2022-09-05T07:00 .. 2022-09-07T15:00 gives
// 3 days x 8 buckets.
struct StudyWindow {
  Timestamp start;
  Timestamp end;

  // Throws ArgumentError for unaligned or empty windows.
  void validate() const;
  std::vector<Timestamp> buckets() const;
  int first_hour() const;
  int end_hour() const;  // exclusive, 1..24
  bool contains(Timestamp t) const;
};

// Vehicle fraction vacant: (capacity - occupied) / capacity. Throws DomainError
// unless capacity > 0 and 0 <= occupied <= capacity.
double availability(int capacity, int occupied);

// Running-balance step: occupied + in - out clamped to [0, capacity].
struct BalanceStep {
  int occupied = 0;
  bool clamped = false;
};
BalanceStep balance_step(int occupied, int capacity, int influx, int outflux);

// Per (vehicle, hour bucket) movement on the segment of the vehicle's first
// snapped sighting in that hour. Inbound when the snap offset grows toward the
// segment's terminal gate between the first and last sighting on that segment;
// single sightings count as inbound.
struct Movement {
  std::string vehicle_key;
  Timestamp bucket;
  int segment_id = 0;
  bool inbound = true;
  double distance_to_gate = 0.0;  // at the first sighting
  std::vector<double> speeds;     // observed speeds on that segment
};

std::vector<Movement> classify_movements(std::span<const spatial::JoinedObservation> joined,
                                         std::span<const spatial::Segment> segments);

struct AggregationOptions {
  // Occupancy per section at each day's first bucket; unspecified sections start at 0.
  std::map<int, int> initial_occupancy;
};

// One row per (bucket, segment), rows ordered by (timestamp, segment). Empty
// buckets emit zero-count rows. Availability is the running per-section
// balance of the row's home section after applying the bucket's flows, reset
// at the start of each day. Throws ArgumentError for an unaligned window.
std::vector<FeatureRow> aggregate_hourly(std::span<const spatial::JoinedObservation> joined,
                                         const geo::Campus& campus,
                                         std::span<const spatial::Segment> segments,
                                         const StudyWindow& window,
                                         const AggregationOptions& options = {});

std::vector<FeatureRow> aggregate_hourly(std::span<const spatial::JoinedObservation> joined,
                                         const geo::Campus& campus, const StudyWindow& window,
                                         const AggregationOptions& options = {});

struct CleanReport {
  std::size_t input_rows = 0;
  std::size_t duplicates_removed = 0;
  std::size_t missing_target_dropped = 0;
  std::size_t out_of_range_dropped = 0;
  std::size_t output_rows = 0;
};

struct CleanResult {
  std::vector<FeatureRow> rows;
  CleanReport report;
};

// Drops exact duplicates (keeping the first), rows without a target and rows
// whose availability lies outside [0,1]. Order of survivors is preserved.
CleanResult clean(std::span<const FeatureRow> rows);

// The attribute names kept from the raw 25-attribute export.
const std::vector<std::string>& retained_attributes();

// Projects a raw attribute map onto the retained attributes; extras are
// ignored. An empty "Availability" value is a missing target. Throws
// SchemaError naming a missing attribute, ArgumentError for unparsable values.
FeatureRow select_features(const std::map<std::string, std::string>& raw);

}  // namespace parkcast::features
