#include "parkcast/geodata/campus.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <set>

namespace parkcast::geo {

using nlohmann::json;

int Campus::total_capacity() const {
  int total = 0;
  for (const auto& s : sections) total += s.capacity;
  return total;
}

const Gate* Campus::find_gate(int id) const {
  for (const auto& g : gates) {
    if (g.id == id) return &g;
  }
  return nullptr;
}

const ParkingSection* Campus::find_section(int id) const {
  for (const auto& s : sections) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

std::vector<int> Campus::sections_for_gate(int gate_id) const {
  const Gate* gate = find_gate(gate_id);
  if (!gate) throw LookupError("unknown gate " + std::to_string(gate_id));
  if (!gate->sections.empty()) return gate->sections;
  std::vector<int> ids;
  for (const auto& s : sections) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

int Campus::home_section(int gate_id) const {
  auto ids = sections_for_gate(gate_id);
  if (ids.empty()) throw LookupError("gate " + std::to_string(gate_id) + " serves no section");
  return ids.front();
}

namespace {

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

void check_points(const std::vector<GeoPoint>& pts, const std::string& field,
                  std::vector<Violation>& out) {
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!pts[i].valid()) {
      out.push_back({field, "coordinate range",
                     "point " + std::to_string(i) + " is outside lon/lat ranges or not finite"});
      return;
    }
  }
}

}  // namespace

std::vector<Violation> validate_campus(const Campus& c) {
  std::vector<Violation> out;

  const bool have_boundary = c.boundary.size() >= 2;
  if (!have_boundary) {
    out.push_back({"boundary", "no boundary", "campus has no boundary road"});
  } else {
    check_points(c.boundary, "boundary", out);
  }
  if (!(c.gate_snap_threshold_m > 0.0) || !std::isfinite(c.gate_snap_threshold_m)) {
    out.push_back({"gate_snap_threshold_m", "threshold", "must be a positive finite number"});
  }

  for (const auto& [id, p] : c.network.nodes) {
    if (!p.valid()) {
      out.push_back({"network.nodes[" + std::to_string(id) + "]", "coordinate range",
                     "node is outside lon/lat ranges or not finite"});
    }
  }
  for (std::size_t i = 0; i < c.network.edges.size(); ++i) {
    const auto& e = c.network.edges[i];
    const std::string field = "network.edges[" + std::to_string(i) + "]";
    if (!c.network.nodes.count(e.from) || !c.network.nodes.count(e.to)) {
      out.push_back({field, "edge endpoints",
                     "endpoint node " + std::to_string(c.network.nodes.count(e.from) ? e.to : e.from) +
                         " does not exist"});
    }
    if (e.polyline.size() < 2) {
      out.push_back({field, "edge geometry", "polyline needs at least two points"});
      continue;
    }
    check_points(e.polyline, field, out);
    const double recomputed = polyline_length(e.polyline);
    const double scale = std::max(std::abs(recomputed), 1e-9);
    if (!(std::abs(e.length - recomputed) <= 1e-6 * scale)) {
      out.push_back({field, "edge length",
                     "stored length " + std::to_string(e.length) + " m differs from polyline length " +
                         std::to_string(recomputed) + " m"});
    }
  }

  std::vector<int> gate_ids;
  for (const auto& g : c.gates) gate_ids.push_back(g.id);
  std::sort(gate_ids.begin(), gate_ids.end());
  for (std::size_t i = 0; i < gate_ids.size(); ++i) {
    if (gate_ids[i] != static_cast<int>(i) + 1) {
      out.push_back({"gates", "gate ids",
                     "gate ids must be unique and contiguous from 1, got " + join_ints(gate_ids)});
      break;
    }
  }

  std::set<int> section_ids;
  for (const auto& s : c.sections) section_ids.insert(s.id);

  for (const auto& g : c.gates) {
    const std::string field = "gate " + std::to_string(g.id);
    if (!g.location.valid()) {
      out.push_back({field, "coordinate range", "gate location outside lon/lat ranges"});
      continue;
    }
    for (int sid : g.sections) {
      if (!section_ids.count(sid)) {
        out.push_back({field, "gate sections", "serves unknown section " + std::to_string(sid)});
      }
    }
    if (have_boundary) {
      const double d = project_onto_polyline(g.location, c.boundary).distance;
      if (!(d <= c.gate_snap_threshold_m)) {
        out.push_back({field, "gate on boundary",
                       "gate is " + std::to_string(d) + " m from the boundary (threshold " +
                           std::to_string(c.gate_snap_threshold_m) + " m)"});
      }
    }
  }

  if (section_ids.size() != c.sections.size()) {
    out.push_back({"sections", "section ids", "section ids must be unique"});
  }
  for (const auto& s : c.sections) {
    const std::string field = "section " + std::to_string(s.id);
    if (s.ring.size() < 4) {
      out.push_back({field, "ring size",
                     "ring has " + std::to_string(s.ring.size()) + " points, needs at least 4"});
    }
    if (s.ring.empty() || !(s.ring.front() == s.ring.back())) {
      out.push_back({field, "ring closed", field + ": ring is not closed"});
    }
    check_points(s.ring, field, out);
    if (s.capacity <= 0) {
      out.push_back({field, "capacity", "capacity must be positive, got " + std::to_string(s.capacity)});
    }
  }

  if (c.declared_total_capacity && c.total_capacity() != *c.declared_total_capacity) {
    out.push_back({"sections", "capacity sum",
                   "capacities sum to " + std::to_string(c.total_capacity()) + ", declared total " +
                       std::to_string(*c.declared_total_capacity)});
  }
  return out;
}

namespace {

[[noreturn]] void schema(std::size_t index, const std::string& what) {
  throw SchemaError("feature " + std::to_string(index) + ": " + what);
}

GeoPoint parse_position(const json& j, std::size_t index) {
  if (!j.is_array() || j.size() < 2 || !j[0].is_number() || !j[1].is_number()) {
    schema(index, "position must be [lon, lat]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

std::vector<GeoPoint> parse_positions(const json& j, std::size_t index) {
  if (!j.is_array()) schema(index, "coordinates must be an array of positions");
  std::vector<GeoPoint> out;
  out.reserve(j.size());
  for (const auto& p : j) out.push_back(parse_position(p, index));
  return out;
}

const json& geometry_of(const json& feature, std::size_t index, std::initializer_list<const char*> types) {
  if (!feature.contains("geometry") || !feature["geometry"].is_object()) {
    schema(index, "missing geometry");
  }
  const json& g = feature["geometry"];
  const std::string type = g.value("type", "");
  for (const char* t : types) {
    if (type == t) {
      if (!g.contains("coordinates")) schema(index, "geometry has no coordinates");
      return g;
    }
  }
  schema(index, "unexpected geometry type '" + type + "'");
}

template <typename T>
T required_number(const json& props, const char* key, std::size_t index) {
  if (!props.contains(key) || !props[key].is_number()) {
    schema(index, std::string("missing numeric property '") + key + "'");
  }
  if constexpr (std::is_integral_v<T>) {
    if (!props[key].is_number_integer()) schema(index, std::string("property '") + key + "' must be an integer");
  }
  return props[key].get<T>();
}

double round9(double v) { return std::round(v * 1e9) / 1e9; }

json position(const GeoPoint& p) { return json::array({round9(p.lon), round9(p.lat)}); }

json positions(const std::vector<GeoPoint>& pts) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back(position(p));
  return arr;
}

}  // namespace

Campus load_campus(std::string_view geojson) {
  json doc;
  try {
    doc = json::parse(geojson.begin(), geojson.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed GeoJSON: ") + e.what(), e.byte);
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
      !doc["features"].is_array()) {
    throw SchemaError("document is not a GeoJSON FeatureCollection");
  }

  Campus campus;
  bool seen_boundary = false;
  std::int64_t next_auto_node = 1;
  std::vector<std::size_t> unresolved_roads;

  const json& features = doc["features"];
  for (const auto& f : features) {
    if (f.is_object() && f.contains("properties") && f["properties"].is_object() &&
        f["properties"].value("kind", "") == "road") {
      const auto& props = f["properties"];
      for (const char* key : {"from", "to"}) {
        if (props.contains(key) && props[key].is_number_integer()) {
          next_auto_node = std::max(next_auto_node, props[key].get<std::int64_t>() + 1);
        }
      }
    }
  }

  auto node_for = [&](const GeoPoint& p) {
    for (const auto& [id, q] : campus.network.nodes) {
      if (q == p) return id;
    }
    const std::int64_t id = next_auto_node++;
    campus.network.nodes.emplace(id, p);
    return id;
  };

  for (std::size_t i = 0; i < features.size(); ++i) {
    const json& f = features[i];
    if (!f.is_object() || f.value("type", "") != "Feature") schema(i, "not a GeoJSON Feature");
    if (!f.contains("properties") || !f["properties"].is_object() || !f["properties"].contains("kind") ||
        !f["properties"]["kind"].is_string()) {
      schema(i, "missing 'kind' property");
    }
    const json& props = f["properties"];
    const std::string kind = props["kind"].get<std::string>();

    if (kind == "road") {
      const json& g = geometry_of(f, i, {"LineString"});
      RoadEdge e;
      e.polyline = parse_positions(g["coordinates"], i);
      if (e.polyline.size() < 2) schema(i, "road needs at least two positions");
      e.name = props.value("name", "");
      e.length = props.contains("length_m") ? required_number<double>(props, "length_m", i)
                                            : polyline_length(e.polyline);
      if (props.contains("from") && props.contains("to")) {
        e.from = required_number<std::int64_t>(props, "from", i);
        e.to = required_number<std::int64_t>(props, "to", i);
        campus.network.nodes.emplace(e.from, e.polyline.front());
        campus.network.nodes.emplace(e.to, e.polyline.back());
      } else {
        e.from = node_for(e.polyline.front());
        e.to = node_for(e.polyline.back());
      }
      campus.network.edges.push_back(std::move(e));
    } else if (kind == "boundary") {
      if (seen_boundary) schema(i, "more than one boundary feature");
      seen_boundary = true;
      const json& g = geometry_of(f, i, {"LineString", "Polygon"});
      if (g["type"] == "Polygon") {
        if (!g["coordinates"].is_array() || g["coordinates"].empty()) schema(i, "polygon has no rings");
        campus.boundary = parse_positions(g["coordinates"][0], i);
      } else {
        campus.boundary = parse_positions(g["coordinates"], i);
      }
      if (props.contains("total_capacity")) {
        campus.declared_total_capacity = required_number<int>(props, "total_capacity", i);
      }
      if (props.contains("gate_snap_threshold_m")) {
        campus.gate_snap_threshold_m = required_number<double>(props, "gate_snap_threshold_m", i);
      }
    } else if (kind == "gate") {
      const json& g = geometry_of(f, i, {"Point"});
      Gate gate;
      gate.id = required_number<int>(props, "gate_id", i);
      gate.location = parse_position(g["coordinates"], i);
      gate.name = props.value("name", "Gate " + std::to_string(gate.id));
      if (props.contains("sections")) {
        if (!props["sections"].is_array()) schema(i, "'sections' must be an array of section ids");
        for (const auto& s : props["sections"]) {
          if (!s.is_number_integer()) schema(i, "'sections' must be an array of section ids");
          gate.sections.push_back(s.get<int>());
        }
      }
      campus.gates.push_back(std::move(gate));
    } else if (kind == "parking") {
      const json& g = geometry_of(f, i, {"Polygon"});
      if (!g["coordinates"].is_array() || g["coordinates"].empty()) schema(i, "polygon has no rings");
      ParkingSection s;
      s.id = required_number<int>(props, "section_id", i);
      s.capacity = required_number<int>(props, "capacity", i);
      s.ring = parse_positions(g["coordinates"][0], i);
      s.name = props.value("name", "Section " + std::to_string(s.id));
      campus.sections.push_back(std::move(s));
    } else {
      schema(i, "unknown kind '" + kind + "'");
    }
  }

  std::sort(campus.gates.begin(), campus.gates.end(),
            [](const Gate& a, const Gate& b) { return a.id < b.id; });
  std::sort(campus.sections.begin(), campus.sections.end(),
            [](const ParkingSection& a, const ParkingSection& b) { return a.id < b.id; });

  auto violations = validate_campus(campus);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return campus;
}

std::string to_geojson(const Campus& c) {
  json features = json::array();

  json boundary_props = {{"kind", "boundary"}, {"gate_snap_threshold_m", c.gate_snap_threshold_m}};
  if (c.declared_total_capacity) boundary_props["total_capacity"] = *c.declared_total_capacity;
  features.push_back({{"type", "Feature"},
                      {"properties", boundary_props},
                      {"geometry", {{"type", "LineString"}, {"coordinates", positions(c.boundary)}}}});

  for (const auto& g : c.gates) {
    json props = {{"kind", "gate"}, {"gate_id", g.id}, {"name", g.name}};
    if (!g.sections.empty()) props["sections"] = g.sections;
    features.push_back({{"type", "Feature"},
                        {"properties", props},
                        {"geometry", {{"type", "Point"}, {"coordinates", position(g.location)}}}});
  }

  for (const auto& s : c.sections) {
    features.push_back(
        {{"type", "Feature"},
         {"properties", {{"kind", "parking"}, {"section_id", s.id}, {"capacity", s.capacity}, {"name", s.name}}},
         {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({positions(s.ring)})}}}});
  }

  for (const auto& e : c.network.edges) {
    std::vector<GeoPoint> rounded;
    for (const auto& p : e.polyline) rounded.push_back({round9(p.lon), round9(p.lat)});
    json props = {{"kind", "road"}, {"from", e.from}, {"to", e.to}, {"length_m", polyline_length(rounded)}};
    if (!e.name.empty()) props["name"] = e.name;
    features.push_back({{"type", "Feature"},
                        {"properties", props},
                        {"geometry", {{"type", "LineString"}, {"coordinates", positions(e.polyline)}}}});
  }

  json doc = {{"type", "FeatureCollection"}, {"features", features}};
  return doc.dump(2) + "\n";
}

}  // namespace parkcast::geo
