#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "parkcast/common/csv.hpp"
#include "parkcast/features/features.hpp"

namespace parkcast::features {

void StudyWindow::validate() const {
  if (!is_hour_aligned(start) || !is_hour_aligned(end)) {
    throw ArgumentError("study window must be hour-aligned: " + format_iso8601(start) + " .. " +
                        format_iso8601(end));
  }
  if (!(end > start)) throw ArgumentError("study window end must follow its start");
  if (end_hour() <= first_hour()) {
    throw ArgumentError("study window daily hours are empty: [" + std::to_string(first_hour()) + ", " +
                        std::to_string(end_hour()) + ")");
  }
}

int StudyWindow::first_hour() const { return hour_of_day(start); }

int StudyWindow::end_hour() const {
  const int h = hour_of_day(end);
  return h == 0 ? 24 : h;
}

std::vector<Timestamp> StudyWindow::buckets() const {
  validate();
  const Timestamp first_day = floor_day(start);
  const Timestamp last_day = floor_day(end - std::chrono::seconds{1});
  std::vector<Timestamp> out;
  for (Timestamp day = first_day; day <= last_day; day += std::chrono::seconds{kSecondsPerDay}) {
    for (int h = first_hour(); h < end_hour(); ++h) {
      out.push_back(day + std::chrono::seconds{h * kSecondsPerHour});
    }
  }
  return out;
}

bool StudyWindow::contains(Timestamp t) const {
  if (t < start || t >= end) return false;
  const int h = hour_of_day(t);
  return h >= first_hour() && h < end_hour();
}

double availability(int capacity, int occupied) {
  if (capacity <= 0) throw DomainError("capacity must be positive");
  if (occupied < 0 || occupied > capacity) {
    throw DomainError("occupied " + std::to_string(occupied) + " outside [0, " + std::to_string(capacity) + "]");
  }
  return static_cast<double>(capacity - occupied) / static_cast<double>(capacity);
}

BalanceStep balance_step(int occupied, int capacity, int influx, int outflux) {
  const long long next = static_cast<long long>(occupied) + influx - outflux;
  BalanceStep out;
  out.occupied = static_cast<int>(std::clamp<long long>(next, 0, capacity));
  out.clamped = next != out.occupied;
  return out;
}

std::vector<Movement> classify_movements(std::span<const spatial::JoinedObservation> joined,
                                         std::span<const spatial::Segment> segments) {
  std::unordered_map<int, double> lengths;
  for (const auto& s : segments) lengths[s.id] = s.length;

  // Group snapped sightings by (vehicle, bucket), keeping first-seen order.
  struct Key {
    std::string vehicle;
    std::int64_t bucket;
    bool operator<(const Key& o) const {
      return bucket < o.bucket || (bucket == o.bucket && vehicle < o.vehicle);
    }
  };
  std::map<Key, std::vector<const spatial::JoinedObservation*>> groups;
  for (const auto& j : joined) {
    if (!j.segment_id) continue;
    groups[{j.observation.vehicle_key, to_epoch(floor_hour(j.observation.timestamp))}].push_back(&j);
  }

  std::vector<Movement> out;
  out.reserve(groups.size());
  for (auto& [key, obs] : groups) {
    std::stable_sort(obs.begin(), obs.end(), [](const auto* a, const auto* b) {
      return a->observation.timestamp < b->observation.timestamp;
    });
    Movement m;
    m.vehicle_key = key.vehicle;
    m.bucket = from_epoch(key.bucket);
    m.segment_id = *obs.front()->segment_id;
    const auto len = lengths.find(m.segment_id);
    if (len == lengths.end()) throw LookupError("unknown segment " + std::to_string(m.segment_id));
    m.distance_to_gate = std::max(0.0, len->second - obs.front()->offset);

    const spatial::JoinedObservation* first = nullptr;
    const spatial::JoinedObservation* last = nullptr;
    std::size_t on_segment = 0;
    for (const auto* j : obs) {
      if (*j->segment_id != m.segment_id) continue;
      if (!first) first = j;
      last = j;
      ++on_segment;
      if (j->observation.speed_kmh) m.speeds.push_back(*j->observation.speed_kmh);
    }
    m.inbound = on_segment == 1 || last->offset > first->offset;
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<FeatureRow> aggregate_hourly(std::span<const spatial::JoinedObservation> joined,
                                         const geo::Campus& campus,
                                         std::span<const spatial::Segment> segments,
                                         const StudyWindow& window, const AggregationOptions& options) {
  window.validate();
  const auto buckets = window.buckets();

  std::vector<int> seg_ids;
  std::map<int, int> home;  // segment -> home section of its terminal gate
  for (const auto& s : segments) {
    seg_ids.push_back(s.id);
    home[s.id] = campus.home_section(s.end_gate);
  }
  std::sort(seg_ids.begin(), seg_ids.end());

  struct Cell {
    int in = 0, out = 0;
    double distance_sum = 0.0;
    int distance_n = 0;
    double speed_sum = 0.0;
    int speed_n = 0;
  };
  std::map<std::pair<std::int64_t, int>, Cell> cells;
  for (const auto& m : classify_movements(joined, segments)) {
    if (!window.contains(m.bucket)) continue;
    Cell& c = cells[{to_epoch(m.bucket), m.segment_id}];
    (m.inbound ? c.in : c.out) += 1;
    c.distance_sum += m.distance_to_gate;
    c.distance_n += 1;
    for (double v : m.speeds) {
      c.speed_sum += v;
      c.speed_n += 1;
    }
  }

  std::map<int, int> occupied;
  auto reset_day = [&] {
    occupied.clear();
    for (const auto& s : campus.sections) {
      const auto it = options.initial_occupancy.find(s.id);
      const int init = it == options.initial_occupancy.end() ? 0 : it->second;
      if (init < 0 || init > s.capacity) {
        throw ArgumentError("initial occupancy of section " + std::to_string(s.id) + " out of range");
      }
      occupied[s.id] = init;
    }
  };

  std::vector<FeatureRow> rows;
  rows.reserve(buckets.size() * seg_ids.size());
  Timestamp current_day{};
  bool first = true;
  for (const Timestamp bucket : buckets) {
    if (first || floor_day(bucket) != current_day) {
      reset_day();
      current_day = floor_day(bucket);
      first = false;
    }
    std::map<int, std::pair<int, int>> flows;  // section -> (in, out)
    for (int seg : seg_ids) {
      const auto it = cells.find({to_epoch(bucket), seg});
      if (it == cells.end()) continue;
      auto& f = flows[home[seg]];
      f.first += it->second.in;
      f.second += it->second.out;
    }
    for (auto& [section, occ] : occupied) {
      const auto f = flows.find(section);
      if (f == flows.end()) continue;
      occ = balance_step(occ, campus.find_section(section)->capacity, f->second.first, f->second.second).occupied;
    }
    for (int seg : seg_ids) {
      FeatureRow row;
      row.timestamp = bucket;
      row.segment_no = seg;
      const auto* section = campus.find_section(home[seg]);
      row.total_parking_space = section->capacity;
      row.availability = availability(section->capacity, occupied[section->id]);
      const auto it = cells.find({to_epoch(bucket), seg});
      if (it != cells.end()) {
        const Cell& c = it->second;
        row.n_vehicles = c.in;
        row.n_vehicles_exit = c.out;
        if (c.distance_n) row.distance = c.distance_sum / c.distance_n;
        if (c.speed_n) row.travel_speed = c.speed_sum / c.speed_n;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<FeatureRow> aggregate_hourly(std::span<const spatial::JoinedObservation> joined,
                                         const geo::Campus& campus, const StudyWindow& window,
                                         const AggregationOptions& options) {
  const auto segments = spatial::segment_roads(campus);
  return aggregate_hourly(joined, campus, segments, window, options);
}

CleanResult clean(std::span<const FeatureRow> rows) {
  CleanResult out;
  out.report.input_rows = rows.size();
  for (const auto& r : rows) {
    if (!r.availability || !std::isfinite(*r.availability)) {
      ++out.report.missing_target_dropped;
      continue;
    }
    if (*r.availability < 0.0 || *r.availability > 1.0) {
      ++out.report.out_of_range_dropped;
      continue;
    }
    if (std::find(out.rows.begin(), out.rows.end(), r) != out.rows.end()) {
      ++out.report.duplicates_removed;
      continue;
    }
    out.rows.push_back(r);
  }
  out.report.output_rows = out.rows.size();
  return out;
}

const std::vector<std::string>& retained_attributes() {
  static const std::vector<std::string> names = {
      "Distance",        "Timestamp",  "Travel Speed",        "No. of Vehicles",
      "No. of Vehicles exit", "No. Segment", "Total Parking Space", "Availability"};
  return names;
}

FeatureRow select_features(const std::map<std::string, std::string>& raw) {
  for (const auto& name : retained_attributes()) {
    if (!raw.count(name)) throw SchemaError("missing retained attribute '" + name + "'");
  }
  auto number = [&](const char* name) { return csv::parse_double(raw.at(name)); };
  auto count = [&](const char* name) {
    const double v = number(name);
    if (v != std::floor(v)) throw ArgumentError(std::string("'") + name + "' must be integral");
    return static_cast<int>(v);
  };
  FeatureRow row;
  row.distance = number("Distance");
  row.timestamp = parse_iso8601(raw.at("Timestamp"));
  row.travel_speed = number("Travel Speed");
  row.n_vehicles = count("No. of Vehicles");
  row.n_vehicles_exit = count("No. of Vehicles exit");
  row.segment_no = count("No. Segment");
  row.total_parking_space = count("Total Parking Space");
  if (!raw.at("Availability").empty()) row.availability = number("Availability");
  return row;
}

}  // namespace parkcast::features
