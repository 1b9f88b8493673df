#pragma once

#include <cstdint>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "parkcast/common/time.hpp"
#include "parkcast/features/features.hpp"
#include "parkcast/geodata/campus.hpp"
#include "parkcast/spatial/spatial.hpp"

namespace parkcast::pipeline {

// Generator parameters. Rates are expected vehicles per hour, indexed
// [gate - 1][hour - first_hour].
struct SynthSpec {
  Timestamp start_day = parse_iso8601("2022-09-05T00:00:00Z");
  int days = 3;
  int first_hour = 7;
  int hours = 8;
  std::vector<std::vector<double>> arrival_rates;
  std::vector<std::vector<double>> departure_rates;
  double noise_m = 0.0;  // GPS noise standard deviation
  std::map<int, int> initial_occupancy;

  features::StudyWindow window() const;
  nlohmann::ordered_json to_json() const;
  static SynthSpec from_json(const nlohmann::ordered_json& j);
};

// Morning-heavy arrivals and afternoon-heavy departures on the synthetic campus.
SynthSpec default_synth_spec();

// Rectangular perimeter road with five gates and three 315-space sections.
geo::Campus synthetic_campus();

struct GroundTruthRow {
  Timestamp bucket;
  int section_id = 0;
  int capacity = 0;
  int occupied = 0;  // after the bucket's flows
  double availability = 0.0;
};

struct GateFlow {
  Timestamp bucket;
  int gate_id = 0;
  int arrivals = 0;
  int departures = 0;
};

struct SynthOutput {
  geo::Campus campus;
  std::vector<spatial::VehicleObservation> observations;  // time-ordered
  std::vector<GroundTruthRow> truth;
  std::vector<GateFlow> flows;
};

// Simulates each vehicle as three sightings along the segment that ends at
// its gate: offsets increase for arrivals and decrease for departures.
// Departures never exceed the home section's occupancy and arrivals never
// exceed its vacancy. Throws ArgumentError for malformed specs and
// DomainError when the expected rates alone would overfill a section.
SynthOutput generate_synthetic(const SynthSpec& spec, std::uint64_t seed);
SynthOutput generate_synthetic(const SynthSpec& spec, std::uint64_t seed, const geo::Campus& campus);

std::string write_ground_truth_csv(const std::vector<GroundTruthRow>& rows);
std::vector<GroundTruthRow> read_ground_truth_csv(std::string_view text);

}  // namespace parkcast::pipeline
