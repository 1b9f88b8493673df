#include "parkcast/pipeline/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "parkcast/common/csv.hpp"
#include "parkcast/common/error.hpp"

namespace parkcast::pipeline {

using json = nlohmann::ordered_json;
using nlohmann::ordered_json;
using geo::GeoPoint;

namespace {

constexpr double kLon0 = 55.4800;
constexpr double kLat0 = 25.2850;

// Local east/north meters to degrees around the campus origin.
GeoPoint at(double east_m, double north_m) {
  const double m_per_deg_lat = geo::kEarthRadiusM * std::numbers::pi / 180.0;
  const double m_per_deg_lon = m_per_deg_lat * std::cos(kLat0 * std::numbers::pi / 180.0);
  return {kLon0 + east_m / m_per_deg_lon, kLat0 + north_m / m_per_deg_lat};
}

std::vector<GeoPoint> rect(double x0, double y0, double x1, double y1) {
  return {at(x0, y0), at(x1, y0), at(x1, y1), at(x0, y1), at(x0, y0)};
}

}  // namespace

features::StudyWindow SynthSpec::window() const {
  features::StudyWindow w;
  w.start = start_day + std::chrono::seconds{first_hour * kSecondsPerHour};
  w.end = start_day + std::chrono::seconds{(days - 1) * kSecondsPerDay + (first_hour + hours) * kSecondsPerHour};
  return w;
}

ordered_json SynthSpec::to_json() const {
  ordered_json init = ordered_json::object();
  for (const auto& [s, v] : initial_occupancy) init[std::to_string(s)] = v;
  return {{"start_day", format_iso8601(start_day)},
          {"days", days},
          {"first_hour", first_hour},
          {"hours", hours},
          {"arrival_rates", arrival_rates},
          {"departure_rates", departure_rates},
          {"noise_m", noise_m},
          {"initial_occupancy", init}};
}

SynthSpec SynthSpec::from_json(const json& j) {
  SynthSpec s = default_synth_spec();
  try {
    if (!j.is_object()) throw SchemaError("synth spec must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      static const std::vector<std::string> known = {"start_day",     "days",          "first_hour",
                                                     "hours",         "arrival_rates", "departure_rates",
                                                     "noise_m",       "initial_occupancy"};
      if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
        throw SchemaError("synth spec: unknown key '" + it.key() + "'");
      }
    }
    if (j.contains("start_day")) s.start_day = floor_day(parse_iso8601(j["start_day"].get<std::string>()));
    if (j.contains("days")) s.days = j["days"].get<int>();
    if (j.contains("first_hour")) s.first_hour = j["first_hour"].get<int>();
    if (j.contains("hours")) s.hours = j["hours"].get<int>();
    if (j.contains("arrival_rates")) s.arrival_rates = j["arrival_rates"].get<std::vector<std::vector<double>>>();
    if (j.contains("departure_rates")) s.departure_rates = j["departure_rates"].get<std::vector<std::vector<double>>>();
    if (j.contains("noise_m")) s.noise_m = j["noise_m"].get<double>();
    if (j.contains("initial_occupancy")) {
      s.initial_occupancy.clear();
      for (auto it = j["initial_occupancy"].begin(); it != j["initial_occupancy"].end(); ++it) {
        s.initial_occupancy[std::stoi(it.key())] = it.value().get<int>();
      }
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("synth spec: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw SchemaError("synth spec: initial_occupancy keys must be section ids");
  }
  return s;
}

SynthSpec default_synth_spec() {
  SynthSpec s;
  const std::vector<double> arrive = {40, 30, 20, 12, 8, 5, 3, 2};
  const std::vector<double> depart = {0, 2, 4, 8, 12, 20, 30, 40};
  const std::vector<double> weight = {1.0, 0.8, 1.2, 0.9, 1.5};
  for (double w : weight) {
    std::vector<double> a, d;
    for (std::size_t h = 0; h < arrive.size(); ++h) {
      a.push_back(arrive[h] * w);
      d.push_back(depart[h] * w);
    }
    s.arrival_rates.push_back(std::move(a));
    s.departure_rates.push_back(std::move(d));
  }
  return s;
}

geo::Campus synthetic_campus() {
  geo::Campus c;
  // 1200 m x 800 m perimeter loop, counter-clockwise from the south-west corner.
  c.boundary = rect(0, 0, 1200, 800);
  const std::vector<std::pair<double, double>> corners = {{0, 0}, {1200, 0}, {1200, 800}, {0, 800}};
  const std::vector<std::string> sides = {"South Road", "East Road", "North Road", "West Road"};
  for (std::int64_t k = 0; k < 4; ++k) c.network.nodes[k + 1] = at(corners[k].first, corners[k].second);
  for (std::int64_t k = 0; k < 4; ++k) {
    geo::RoadEdge e;
    e.from = k + 1;
    e.to = (k + 1) % 4 + 1;
    e.polyline = {c.network.nodes[e.from], c.network.nodes[e.to]};
    e.length = geo::polyline_length(e.polyline);
    e.name = sides[static_cast<std::size_t>(k)];
    c.network.edges.push_back(std::move(e));
  }
  c.gates = {
      {1, at(400, 0), "Gate 1", {1}},
      {2, at(1100, 0), "Gate 2", {1, 2}},
      {3, at(1200, 600), "Gate 3", {2}},
      {4, at(600, 800), "Gate 4", {2, 3}},
      {5, at(0, 600), "Gate 5", {3}},
  };
  c.sections = {
      {1, rect(150, 100, 550, 300), 315, "Section A"},
      {2, rect(700, 250, 1050, 550), 315, "Section B"},
      {3, rect(150, 450, 550, 700), 315, "Section C"},
  };
  c.declared_total_capacity = 945;
  return c;
}

namespace {

void check_spec(const SynthSpec& spec, const geo::Campus& campus) {
  if (spec.days < 1) throw ArgumentError("synth: days must be >= 1");
  if (spec.first_hour < 0 || spec.hours < 1 || spec.first_hour + spec.hours > 24) {
    throw ArgumentError("synth: hours must lie within one day");
  }
  if (!(spec.noise_m >= 0.0) || !std::isfinite(spec.noise_m)) throw ArgumentError("synth: noise must be >= 0");
  const std::size_t g = campus.gates.size();
  for (const auto* rates : {&spec.arrival_rates, &spec.departure_rates}) {
    if (rates->size() != g) {
      throw ArgumentError("synth: rate curves for " + std::to_string(rates->size()) + " gates, campus has " +
                          std::to_string(g));
    }
    for (const auto& curve : *rates) {
      if (curve.size() != static_cast<std::size_t>(spec.hours)) {
        throw ArgumentError("synth: each rate curve needs " + std::to_string(spec.hours) + " hourly values");
      }
      for (double r : curve) {
        if (!(r >= 0.0) || !std::isfinite(r)) throw ArgumentError("synth: rates must be finite and >= 0");
      }
    }
  }
  for (std::size_t k = 0; k < g; ++k) {
    if (campus.gates[k].id != static_cast<int>(k) + 1) throw ArgumentError("synth: gate ids must be 1..G in order");
  }
  for (const auto& [section, occ] : spec.initial_occupancy) {
    const auto* s = campus.find_section(section);
    if (s == nullptr) throw ArgumentError("synth: initial occupancy for unknown section " + std::to_string(section));
    if (occ < 0 || occ > s->capacity) throw ArgumentError("synth: initial occupancy out of range");
  }
}

void check_expected_capacity(const SynthSpec& spec, const geo::Campus& campus) {
  for (const auto& section : campus.sections) {
    const auto init = spec.initial_occupancy.find(section.id);
    double expected = init == spec.initial_occupancy.end() ? 0.0 : init->second;
    for (int h = 0; h < spec.hours; ++h) {
      for (const auto& gate : campus.gates) {
        if (campus.home_section(gate.id) != section.id) continue;
        const auto k = static_cast<std::size_t>(gate.id - 1);
        expected += spec.arrival_rates[k][static_cast<std::size_t>(h)] -
                    spec.departure_rates[k][static_cast<std::size_t>(h)];
      }
      expected = std::max(expected, 0.0);
      if (expected > section.capacity + 1e-9) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "synth: rates imply %.1f vehicles in section %d (capacity %d) by hour %d",
                      expected, section.id, section.capacity, spec.first_hour + h + 1);
        throw DomainError(buf);
      }
    }
  }
}

GeoPoint point_at_offset(const spatial::Segment& seg, double offset) {
  const auto it = std::upper_bound(seg.cumulative.begin(), seg.cumulative.end(), offset);
  std::size_t i = it == seg.cumulative.begin() ? 0 : static_cast<std::size_t>(it - seg.cumulative.begin()) - 1;
  i = std::min(i, seg.polyline.size() - 2);
  const double d = seg.cumulative[i + 1] - seg.cumulative[i];
  return geo::lerp(seg.polyline[i], seg.polyline[i + 1], d > 0 ? (offset - seg.cumulative[i]) / d : 0.0);
}

int poisson(std::mt19937_64& rng, double mean) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<int> d(mean);
  return d(rng);
}

}  // namespace

SynthOutput generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  return generate_synthetic(spec, seed, synthetic_campus());
}

SynthOutput generate_synthetic(const SynthSpec& spec, std::uint64_t seed, const geo::Campus& campus_in) {
  SynthOutput out;
  // Sightings are placed on the campus as it reads back from disk.
  out.campus = geo::load_campus(geo::to_geojson(campus_in));
  const geo::Campus& campus = out.campus;
  check_spec(spec, campus);
  check_expected_capacity(spec, campus);
  const auto segments = spatial::segment_roads(campus);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double m_per_deg_lat = geo::kEarthRadiusM * std::numbers::pi / 180.0;
  long vehicle = 0;

  auto emit_pass = [&](Timestamp bucket, const spatial::Segment& seg, bool inbound) {
    char key[32];
    std::snprintf(key, sizeof key, "veh-%06ld", ++vehicle);
    std::vector<double> fractions = {0.2, 0.5, 0.8};
    if (!inbound) std::reverse(fractions.begin(), fractions.end());
    const double shift = (unit(rng) - 0.5) * 0.16;
    auto t = bucket + std::chrono::seconds{60 + static_cast<std::int64_t>(unit(rng) * 2940)};
    const double speed = std::round((15.0 + 30.0 * unit(rng)) * 10.0) / 10.0;
    for (double f : fractions) {
      GeoPoint p = point_at_offset(seg, (f + shift) * seg.length);
      if (spec.noise_m > 0.0) {
        const double m_per_deg_lon = m_per_deg_lat * std::cos(p.lat * std::numbers::pi / 180.0);
        p.lon += spec.noise_m * noise(rng) / m_per_deg_lon;
        p.lat += spec.noise_m * noise(rng) / m_per_deg_lat;
      }
      spatial::VehicleObservation obs;
      obs.vehicle_key = key;
      obs.point = p;
      obs.timestamp = t;
      obs.speed_kmh = speed;
      out.observations.push_back(std::move(obs));
      t += std::chrono::seconds{30 + static_cast<std::int64_t>(unit(rng) * 170)};
    }
  };

  for (int day = 0; day < spec.days; ++day) {
    std::map<int, int> occupied;
    for (const auto& s : campus.sections) {
      const auto it = spec.initial_occupancy.find(s.id);
      occupied[s.id] = it == spec.initial_occupancy.end() ? 0 : it->second;
    }
    for (int h = 0; h < spec.hours; ++h) {
      const Timestamp bucket =
          spec.start_day + std::chrono::seconds{day * kSecondsPerDay + (spec.first_hour + h) * kSecondsPerHour};
      std::map<int, int> can_leave = occupied;
      std::vector<int> departures(campus.gates.size()), arrivals(campus.gates.size());
      for (std::size_t k = 0; k < campus.gates.size(); ++k) {
        const int home = campus.home_section(campus.gates[k].id);
        const int d = std::min(poisson(rng, spec.departure_rates[k][static_cast<std::size_t>(h)]), can_leave[home]);
        can_leave[home] -= d;
        departures[k] = d;
      }
      std::map<int, int> vacancy;
      for (const auto& s : campus.sections) vacancy[s.id] = s.capacity - can_leave[s.id];
      for (std::size_t k = 0; k < campus.gates.size(); ++k) {
        const int home = campus.home_section(campus.gates[k].id);
        const int a = std::min(poisson(rng, spec.arrival_rates[k][static_cast<std::size_t>(h)]), vacancy[home]);
        vacancy[home] -= a;
        arrivals[k] = a;
      }
      for (std::size_t k = 0; k < campus.gates.size(); ++k) {
        const int gate = campus.gates[k].id;
        const int home = campus.home_section(gate);
        occupied[home] += arrivals[k] - departures[k];
        out.flows.push_back({bucket, gate, arrivals[k], departures[k]});
        const auto& seg = segments[k];
        for (int v = 0; v < arrivals[k]; ++v) emit_pass(bucket, seg, true);
        for (int v = 0; v < departures[k]; ++v) emit_pass(bucket, seg, false);
      }
      for (const auto& s : campus.sections) {
        out.truth.push_back({bucket, s.id, s.capacity, occupied[s.id],
                             features::availability(s.capacity, occupied[s.id])});
      }
    }
  }
  std::stable_sort(out.observations.begin(), out.observations.end(), [](const auto& a, const auto& b) {
    return a.timestamp < b.timestamp || (a.timestamp == b.timestamp && a.vehicle_key < b.vehicle_key);
  });
  return out;
}

std::string write_ground_truth_csv(const std::vector<GroundTruthRow>& rows) {
  csv::Table t;
  t.header = {"bucket", "section_id", "capacity", "occupied", "availability"};
  for (const auto& r : rows) {
    t.rows.push_back({format_iso8601(r.bucket), std::to_string(r.section_id), std::to_string(r.capacity),
                      std::to_string(r.occupied), csv::format_double(r.availability)});
  }
  return csv::render(t);
}

std::vector<GroundTruthRow> read_ground_truth_csv(std::string_view text) {
  const csv::Table t = csv::parse(text);
  const std::size_t b = t.require("bucket"), s = t.require("section_id"), c = t.require("capacity"),
                    o = t.require("occupied"), a = t.require("availability");
  std::vector<GroundTruthRow> rows;
  for (const auto& r : t.rows) {
    rows.push_back({parse_iso8601(r[b]), static_cast<int>(csv::parse_int(r[s])), static_cast<int>(csv::parse_int(r[c])),
                    static_cast<int>(csv::parse_int(r[o])), csv::parse_double(r[a])});
  }
  return rows;
}

}  // namespace parkcast::pipeline
