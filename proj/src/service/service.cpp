#include "parkcast/service/service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "parkcast/common/error.hpp"
#include "parkcast/common/fingerprint.hpp"
#include "parkcast/features/features.hpp"

namespace parkcast::service {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(OccupancyState s) {
  switch (s) {
    case OccupancyState::low: return "low";
    case OccupancyState::moderate: return "moderate";
    case OccupancyState::high: return "high";
  }
  return "low";
}

OccupancyState occupancy_state(double rate, const Thresholds& t) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw DomainError("occupancy rate must lie in [0, 1]");
  if (rate < t.low) return OccupancyState::low;
  if (rate > t.high) return OccupancyState::high;
  return OccupancyState::moderate;
}

const SectionOccupancy* OccupancySnapshot::find(int section_id) const {
  for (const auto& s : sections) {
    if (s.section_id == section_id) return &s;
  }
  return nullptr;
}

ordered_json OccupancySnapshot::to_json() const {
  ordered_json j = ordered_json::object();
  j["version"] = version;
  j["timestamp"] = format_iso8601(timestamp);
  j["flow_bucket"] = flow_bucket ? ordered_json(format_iso8601(*flow_bucket)) : ordered_json(nullptr);
  ordered_json secs = ordered_json::array();
  int capacity = 0, occupied = 0;
  for (const auto& s : sections) {
    secs.push_back({{"section_id", s.section_id},
                    {"name", s.name},
                    {"capacity", s.capacity},
                    {"occupied", s.occupied},
                    {"vacant", s.capacity - s.occupied},
                    {"occupancy_rate", s.occupancy_rate},
                    {"state", to_string(s.state)}});
    capacity += s.capacity;
    occupied += s.occupied;
  }
  j["sections"] = std::move(secs);
  j["total_capacity"] = capacity;
  j["total_occupied"] = occupied;
  ordered_json in = ordered_json::object(), out = ordered_json::object();
  for (const auto& [seg, n] : influx) in[std::to_string(seg)] = n;
  for (const auto& [seg, n] : outflux) out[std::to_string(seg)] = n;
  j["influx"] = std::move(in);
  j["outflux"] = std::move(out);
  return j;
}

PredictionRequest PredictionRequest::from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("prediction request must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (k != "gate_id" && k != "arrival_time" && k != "segment_id") throw SchemaError("unknown field '" + k + "'");
  }
  if (!j.contains("gate_id") || !j["gate_id"].is_number_integer()) throw SchemaError("gate_id must be an integer");
  if (!j.contains("arrival_time") || !j["arrival_time"].is_string()) {
    throw SchemaError("arrival_time must be an ISO-8601 string");
  }
  PredictionRequest r;
  r.gate_id = j["gate_id"].get<int>();
  try {
    r.arrival_time = parse_iso8601(j["arrival_time"].get<std::string>());
  } catch (const ArgumentError& e) {
    throw SchemaError(std::string("arrival_time: ") + e.what());
  }
  if (j.contains("segment_id") && !j["segment_id"].is_null()) {
    if (!j["segment_id"].is_number_integer()) throw SchemaError("segment_id must be an integer");
    r.segment_id = j["segment_id"].get<int>();
  }
  return r;
}

ordered_json PredictionResponse::to_json() const {
  ordered_json j = ordered_json::object();
  j["recommended_section_id"] = recommended_section_id;
  j["predicted_availability"] = predicted_availability;
  j["predicted_vacant"] = predicted_vacant;
  j["occupancy_state"] = to_string(occupancy_state);
  j["model_fingerprint"] = model_fingerprint;
  j["snapshot_version"] = snapshot_version;
  ordered_json c = ordered_json::array();
  for (const auto& s : candidates) {
    c.push_back({{"section_id", s.section_id},
                 {"segment_id", s.segment_id},
                 {"predicted_availability", s.availability},
                 {"predicted_vacant", s.vacant}});
  }
  j["candidates"] = std::move(c);
  return j;
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

ServiceConfig ServiceConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  static const std::set<std::string> keys = {"model",     "sidecar",       "campus",     "host",
                                             "port",      "cors_origin",   "thresholds", "first_hour",
                                             "end_hour",  "snap_threshold_m", "initial_occupancy"};
  if (!j.is_object()) throw SchemaError("service config must be a JSON object");
  ServiceConfig c;
  try {
    for (const auto& [k, v] : j.items()) {
      if (!keys.count(k)) throw SchemaError("service config: unknown key '" + k + "'");
    }
    if (j.contains("model")) c.model = resolve(base_dir, j["model"].get<std::string>());
    if (j.contains("sidecar")) c.sidecar = resolve(base_dir, j["sidecar"].get<std::string>());
    if (j.contains("campus")) c.campus = resolve(base_dir, j["campus"].get<std::string>());
    if (j.contains("host")) c.host = j["host"].get<std::string>();
    if (j.contains("port")) c.port = j["port"].get<int>();
    if (j.contains("cors_origin")) c.cors_origin = j["cors_origin"].get<std::string>();
    if (j.contains("thresholds")) {
      const auto& t = j["thresholds"];
      c.options.thresholds.low = t.value("low", c.options.thresholds.low);
      c.options.thresholds.high = t.value("high", c.options.thresholds.high);
    }
    if (j.contains("first_hour")) c.options.first_hour = j["first_hour"].get<int>();
    if (j.contains("end_hour")) c.options.end_hour = j["end_hour"].get<int>();
    if (j.contains("snap_threshold_m")) c.options.snap_threshold_m = j["snap_threshold_m"].get<double>();
    if (j.contains("initial_occupancy")) {
      for (const auto& [k, v] : j["initial_occupancy"].items()) c.options.initial_occupancy[std::stoi(k)] = v.get<int>();
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("service config: ") + e.what());
  } catch (const std::logic_error&) {
    throw SchemaError("service config: initial_occupancy keys must be section ids");
  }
  const auto& t = c.options.thresholds;
  if (!(0.0 <= t.low && t.low <= t.high && t.high <= 1.0)) {
    throw SchemaError("service config: thresholds must satisfy 0 <= low <= high <= 1");
  }
  if (c.port < 0 || c.port > 65535) throw SchemaError("service config: port out of range");
  if (!(0 <= c.options.first_hour && c.options.first_hour < c.options.end_hour && c.options.end_hour <= 24)) {
    throw SchemaError("service config: serviceable hours must satisfy 0 <= first_hour < end_hour <= 24");
  }
  return c;
}

ParkingService::ParkingService(geo::Campus campus, models::RegressionModel model, features::Sidecar sidecar,
                               ServiceOptions options, Clock clock)
    : campus_(std::move(campus)),
      model_(std::move(model)),
      sidecar_(std::move(sidecar)),
      options_(std::move(options)),
      clock_(std::move(clock)) {
  const std::string sidecar_fp = sidecar_.fingerprint();
  if (model_.feature_layout.sidecar_fingerprint != sidecar_fp) {
    throw FingerprintMismatch("model was trained against a different dataset sidecar",
                              model_.feature_layout.sidecar_fingerprint, sidecar_fp);
  }
  if (model_.feature_layout.hash != sidecar_.encoder.layout_hash()) {
    throw FingerprintMismatch("model feature layout differs from the sidecar's", model_.feature_layout.hash,
                              sidecar_.encoder.layout_hash());
  }
  if (static_cast<std::size_t>(sidecar_.encoder.n_segments()) != campus_.gates.size()) {
    throw SchemaError("sidecar encodes " + std::to_string(sidecar_.encoder.n_segments()) + " segments but the campus has " +
                      std::to_string(campus_.gates.size()) + " gates");
  }
  if (!clock_) clock_ = [] { return std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now()); };
  segments_ = spatial::segment_roads(campus_);

  auto snap = std::make_shared<OccupancySnapshot>();
  snap->timestamp = clock_();
  std::vector<geo::ParkingSection> sections = campus_.sections;
  std::sort(sections.begin(), sections.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (const auto& s : sections) {
    const auto it = options_.initial_occupancy.find(s.id);
    const int occupied = it == options_.initial_occupancy.end() ? 0 : it->second;
    if (occupied < 0 || occupied > s.capacity) {
      throw DomainError("initial occupancy of section " + std::to_string(s.id) + " exceeds its capacity");
    }
    const double rate = static_cast<double>(occupied) / s.capacity;
    snap->sections.push_back({s.id, s.name, s.capacity, occupied, rate, occupancy_state(rate, options_.thresholds)});
  }
  snapshot_ = std::move(snap);
}

std::unique_ptr<ParkingService> ParkingService::load(const ServiceConfig& config, Clock clock) {
  if (config.model.empty() || config.sidecar.empty() || config.campus.empty()) {
    throw SchemaError("service config needs model, sidecar and campus paths");
  }
  auto campus = geo::load_campus(read_file(config.campus));
  auto model = models::model_from_json(read_file(config.model));
  auto sidecar = features::Sidecar::parse(read_file(config.sidecar));
  return std::make_unique<ParkingService>(std::move(campus), std::move(model), std::move(sidecar), config.options,
                                          std::move(clock));
}

std::shared_ptr<const OccupancySnapshot> ParkingService::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return snapshot_;
}

void ParkingService::publish(std::shared_ptr<const OccupancySnapshot> next) {
  std::lock_guard lock(snapshot_mutex_);
  snapshot_ = std::move(next);
}

ordered_json ParkingService::health() const {
  const auto snap = snapshot();
  return {{"status", "ok"},
          {"model_fingerprint", model_fingerprint()},
          {"model_family", models::to_string(model_.family)},
          {"sidecar_fingerprint", model_.feature_layout.sidecar_fingerprint},
          {"snapshot_version", snap->version},
          {"thresholds", {{"low", options_.thresholds.low}, {"high", options_.thresholds.high}}}};
}

ordered_json ParkingService::sections() const {
  std::map<int, std::vector<int>> gates_for;
  for (const auto& g : campus_.gates) {
    for (const int s : campus_.sections_for_gate(g.id)) gates_for[s].push_back(g.id);
  }
  std::vector<geo::ParkingSection> sorted = campus_.sections;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  ordered_json arr = ordered_json::array();
  int total = 0;
  for (const auto& s : sorted) {
    ordered_json ring = ordered_json::array();
    for (const auto& p : s.ring) ring.push_back({p.lon, p.lat});
    arr.push_back({{"section_id", s.id}, {"name", s.name}, {"capacity", s.capacity}, {"gates", gates_for[s.id]},
                   {"ring", ring}});
    total += s.capacity;
  }
  ordered_json gates = ordered_json::array();
  for (const auto& g : campus_.gates) {
    gates.push_back({{"gate_id", g.id}, {"name", g.name}, {"lon", g.location.lon}, {"lat", g.location.lat},
                     {"sections", campus_.sections_for_gate(g.id)}});
  }
  return {{"sections", arr}, {"total_capacity", total}, {"gates", gates}};
}

features::FeatureRow ParkingService::feature_row(int segment_id, Timestamp arrival_time,
                                                 const OccupancySnapshot& snap) const {
  const auto& enc = sidecar_.encoder;
  const auto& cols = features::FeatureEncoder::numeric_columns();
  auto mean_of = [&](const std::string& name) {
    const auto idx = static_cast<std::size_t>(std::find(cols.begin(), cols.end(), name) - cols.begin());
    return enc.mean().at(idx);
  };
  const int gate = spatial::expected_gate(segments_, segment_id);
  const auto* section = campus_.find_section(campus_.home_section(gate));
  features::FeatureRow row;
  row.timestamp = floor_hour(arrival_time);
  row.segment_no = segment_id;
  row.distance = mean_of("distance");
  row.travel_speed = mean_of("travel_speed");
  const bool current = snap.flow_bucket && *snap.flow_bucket == row.timestamp;
  auto count = [&](const std::map<int, int>& m) {
    const auto it = m.find(segment_id);
    return current && it != m.end() ? it->second : 0;
  };
  row.n_vehicles = count(snap.influx);
  row.n_vehicles_exit = count(snap.outflux);
  row.total_parking_space = section->capacity;
  return row;
}

PredictionResponse ParkingService::predict(const PredictionRequest& request) const {
  if (!campus_.find_gate(request.gate_id)) {
    std::string valid;
    for (const auto& g : campus_.gates) valid += (valid.empty() ? "" : ", ") + std::to_string(g.id);
    throw LookupError("unknown gate " + std::to_string(request.gate_id) + "; valid gates: " + valid);
  }
  const int hour = hour_of_day(request.arrival_time);
  if (hour < options_.first_hour || hour >= options_.end_hour) {
    throw ArgumentError("arrival_time " + format_iso8601(request.arrival_time) + " is outside the serviceable hours " +
                        std::to_string(options_.first_hour) + ":00-" + std::to_string(options_.end_hour) + ":00 UTC");
  }
  const int requested_segment = request.segment_id.value_or(request.gate_id);
  spatial::expected_gate(segments_, requested_segment);

  const auto snap = snapshot();
  std::vector<int> candidates = campus_.sections_for_gate(request.gate_id);
  std::sort(candidates.begin(), candidates.end());

  // Each candidate section is predicted from a segment booked against it:
  // the requested segment when it is, else the lowest such segment.
  std::vector<features::FeatureRow> rows;
  std::vector<int> row_segment;
  for (const int section : candidates) {
    int seg = requested_segment;
    if (campus_.home_section(spatial::expected_gate(segments_, seg)) != section) {
      for (const auto& s : segments_) {
        if (campus_.home_section(s.end_gate) == section) {
          seg = s.id;
          break;
        }
      }
    }
    rows.push_back(feature_row(seg, request.arrival_time, *snap));
    row_segment.push_back(seg);
  }
  const auto frame = sidecar_.encoder.encode(rows);
  const Eigen::VectorXd raw = models::predict(model_, frame);

  PredictionResponse resp;
  resp.model_fingerprint = model_fingerprint();
  resp.snapshot_version = snap->version;
  int best = -1;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!std::isfinite(raw(static_cast<Eigen::Index>(i)))) throw Error("model produced a non-finite prediction");
    const double a = std::clamp(raw(static_cast<Eigen::Index>(i)), 0.0, 1.0);
    const int capacity = campus_.find_section(candidates[i])->capacity;
    SectionPrediction sp{candidates[i], row_segment[i], a, static_cast<int>(std::lround(a * capacity))};
    if (best < 0 || sp.vacant > resp.candidates[static_cast<std::size_t>(best)].vacant) best = static_cast<int>(i);
    resp.candidates.push_back(sp);
  }
  const auto& chosen = resp.candidates[static_cast<std::size_t>(best)];
  resp.recommended_section_id = chosen.section_id;
  resp.predicted_availability = chosen.availability;
  resp.predicted_vacant = chosen.vacant;
  resp.occupancy_state = occupancy_state(1.0 - chosen.availability, options_.thresholds);
  return resp;
}

IngestResult ParkingService::ingest(std::span<const spatial::VehicleObservation> batch) {
  std::lock_guard writer(ingest_mutex_);
  IngestResult result;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (auto err = spatial::check_observation(batch[i])) {
      result.errors.push_back({i, *err});
    } else if (i > 0 && batch[i].timestamp < batch[i - 1].timestamp) {
      result.errors.push_back({i, "timestamp earlier than the previous row; batches must be time-ordered"});
    }
  }
  const auto current = snapshot();
  if (!result.errors.empty()) {
    result.snapshot = current;
    return result;
  }

  auto next = std::make_shared<OccupancySnapshot>(*current);
  next->version = current->version + 1;
  next->timestamp = std::max(clock_(), current->timestamp);

  const auto joined = spatial::spatial_join(batch, segments_, campus_.sections, options_.snap_threshold_m);
  const auto moves = features::classify_movements(joined, segments_);
  for (const auto& m : moves) {
    if (!next->flow_bucket || m.bucket > *next->flow_bucket) {
      next->flow_bucket = m.bucket;
      next->influx.clear();
      next->outflux.clear();
    }
    if (m.bucket == *next->flow_bucket) ++(m.inbound ? next->influx : next->outflux)[m.segment_id];

    const int section_id = campus_.home_section(spatial::expected_gate(segments_, m.segment_id));
    auto it = std::find_if(next->sections.begin(), next->sections.end(),
                           [&](const SectionOccupancy& s) { return s.section_id == section_id; });
    const auto step = features::balance_step(it->occupied, it->capacity, m.inbound ? 1 : 0, m.inbound ? 0 : 1);
    if (step.clamped) {
      result.warnings.push_back("section " + std::to_string(section_id) + " balance clamped at " +
                                std::to_string(step.occupied) + " (vehicle " + m.vehicle_key + ")");
    }
    it->occupied = step.occupied;
  }
  for (auto& s : next->sections) {
    s.occupancy_rate = static_cast<double>(s.occupied) / s.capacity;
    s.state = occupancy_state(s.occupancy_rate, options_.thresholds);
  }
  result.applied = true;
  result.snapshot = next;
  publish(std::move(next));
  return result;
}

}  // namespace parkcast::service
