#include <cmath>

#include "parkcast/common/csv.hpp"
#include "parkcast/spatial/spatial.hpp"

namespace parkcast::spatial {

namespace {

const std::vector<std::string> kObservationHeader = {"vehicle_key", "lon", "lat", "timestamp_iso8601",
                                                     "speed_kmh"};

const std::vector<std::string> kJoinedHeader = {
    "vehicle_key", "lon",           "lat",        "timestamp_iso8601", "speed_kmh",
    "segment_id",  "offset_m",      "snap_distance_m", "section_id",   "expected_gate"};

std::string opt_int(const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(); }

std::optional<int> read_opt_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return static_cast<int>(csv::parse_int(s));
}

VehicleObservation parse_row(const std::vector<std::string>& r, std::size_t key, std::size_t lon,
                             std::size_t lat, std::size_t ts, std::size_t speed) {
  VehicleObservation obs;
  obs.vehicle_key = r[key];
  obs.point = {csv::parse_double(r[lon]), csv::parse_double(r[lat])};
  obs.timestamp = parse_iso8601(r[ts]);
  if (!r[speed].empty()) obs.speed_kmh = csv::parse_double(r[speed]);
  return obs;
}

}  // namespace

std::optional<std::string> check_observation(const VehicleObservation& obs) {
  if (obs.vehicle_key.empty()) return "empty vehicle_key";
  if (!obs.point.valid()) return "coordinates outside lon/lat ranges";
  if (obs.speed_kmh && (!std::isfinite(*obs.speed_kmh) || *obs.speed_kmh < 0.0)) {
    return "speed must be a non-negative number";
  }
  return std::nullopt;
}

ObservationParse parse_observations_csv(std::string_view text) {
  const csv::Table table = csv::parse(text);
  const std::size_t key = table.require("vehicle_key");
  const std::size_t lon = table.require("lon");
  const std::size_t lat = table.require("lat");
  const std::size_t ts = table.require("timestamp_iso8601");
  const std::size_t speed = table.require("speed_kmh");

  ObservationParse out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    try {
      VehicleObservation obs = parse_row(table.rows[i], key, lon, lat, ts, speed);
      if (auto problem = check_observation(obs)) {
        out.errors.push_back({i, *problem});
        continue;
      }
      out.observations.push_back(std::move(obs));
    } catch (const Error& e) {
      out.errors.push_back({i, e.what()});
    }
  }
  return out;
}

std::vector<VehicleObservation> read_observations_csv(std::string_view text) {
  auto parsed = parse_observations_csv(text);
  if (!parsed.errors.empty()) {
    std::vector<Violation> v;
    for (const auto& e : parsed.errors) {
      v.push_back({"observations row " + std::to_string(e.row), "observation", e.message});
    }
    throw ValidationError(std::move(v));
  }
  return std::move(parsed.observations);
}

std::string write_observations_csv(std::span<const VehicleObservation> observations) {
  csv::Table t;
  t.header = kObservationHeader;
  for (const auto& o : observations) {
    t.rows.push_back({o.vehicle_key, csv::format_double(o.point.lon), csv::format_double(o.point.lat),
                      format_iso8601(o.timestamp), o.speed_kmh ? csv::format_double(*o.speed_kmh) : ""});
  }
  return csv::render(t);
}

std::string write_joined_csv(std::span<const JoinedObservation> joined) {
  csv::Table t;
  t.header = kJoinedHeader;
  for (const auto& j : joined) {
    const auto& o = j.observation;
    t.rows.push_back({o.vehicle_key, csv::format_double(o.point.lon), csv::format_double(o.point.lat),
                      format_iso8601(o.timestamp), o.speed_kmh ? csv::format_double(*o.speed_kmh) : "",
                      opt_int(j.segment_id), csv::format_double(j.offset), csv::format_double(j.snap_distance),
                      opt_int(j.section_id), opt_int(j.expected_gate)});
  }
  return csv::render(t);
}

std::vector<JoinedObservation> read_joined_csv(std::string_view text) {
  const csv::Table table = csv::parse(text);
  std::vector<std::size_t> idx;
  for (const auto& name : kJoinedHeader) idx.push_back(table.require(name));
  std::vector<JoinedObservation> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    try {
      JoinedObservation j;
      j.observation = parse_row(r, idx[0], idx[1], idx[2], idx[3], idx[4]);
      j.segment_id = read_opt_int(r[idx[5]]);
      j.offset = csv::parse_double(r[idx[6]]);
      j.snap_distance = csv::parse_double(r[idx[7]]);
      j.section_id = read_opt_int(r[idx[8]]);
      j.expected_gate = read_opt_int(r[idx[9]]);
      out.push_back(std::move(j));
    } catch (const ArgumentError& e) {
      throw SchemaError("joined row " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace parkcast::spatial
