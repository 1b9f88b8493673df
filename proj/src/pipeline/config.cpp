#include "parkcast/pipeline/config.hpp"

#include <set>

#include "parkcast/common/error.hpp"
#include "parkcast/common/fingerprint.hpp"

#ifndef PARKCAST_VERSION
#define PARKCAST_VERSION "0.0.0"
#endif

namespace parkcast::pipeline {

using json = nlohmann::ordered_json;
using nlohmann::ordered_json;

std::string tool_version() { return PARKCAST_VERSION; }

std::filesystem::path PipelineConfig::path(const std::string& key, const std::string& default_name) const {
  const auto it = paths.find(key);
  return it != paths.end() ? it->second : out / default_name;
}

features::StudyWindow PipelineConfig::study_window() const { return window ? *window : synth.window(); }

ordered_json PipelineConfig::to_json() const {
  ordered_json j = ordered_json::object();
  j["seed"] = seed;
  const auto w = study_window();
  j["window"] = {{"start", format_iso8601(w.start)}, {"end", format_iso8601(w.end)}};
  j["snap_threshold_m"] = snap_threshold_m;
  ordered_json occ = ordered_json::object();
  for (const auto& [s, n] : initial_occupancy) occ[std::to_string(s)] = n;
  j["initial_occupancy"] = std::move(occ);
  j["split"] = {{"mode", evaltune::to_string(split_mode)}, {"train_ratio", train_ratio}};
  j["cv"] = {{"k", cv.k}, {"mode", evaltune::to_string(cv.mode)}};
  j["search"] = {{"kind", search == evaltune::SearchKind::grid ? "grid" : "random"}, {"budget", budget}};
  ordered_json fams = ordered_json::array();
  for (const auto f : families) fams.push_back(models::to_string(f));
  j["families"] = std::move(fams);
  ordered_json grid_json = ordered_json::object();
  for (const auto& [f, s] : grids) grid_json[models::to_string(f)] = s.to_json();
  j["grids"] = std::move(grid_json);
  ordered_json hp = ordered_json::object();
  for (const auto& [f, h] : hyperparameters) hp[models::to_string(f)] = h;
  j["hyperparameters"] = std::move(hp);
  j["train_family"] = models::to_string(train_family);
  j["vehicle_scale"] = vehicle_scale ? ordered_json(*vehicle_scale) : ordered_json(nullptr);
  j["synth"] = synth.to_json();
  j["service"] = service;
  return j;
}

std::string PipelineConfig::hash() const { return fingerprint_of(to_json().dump()); }

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "seed",   "out",      "paths",      "window",          "snap_threshold_m", "initial_occupancy",
      "split",  "cv",       "search",     "families",        "grids",            "hyperparameters",
      "train_family", "vehicle_scale", "synth", "service"};
  return keys;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) throw SchemaError("config: unknown key '" + where + k + "'");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw SchemaError("config: expected a JSON object");
  reject_unknown(j, known_keys(), "");
  PipelineConfig c;
  try {
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("out")) c.out = resolve(base_dir, j["out"].get<std::string>());
    if (j.contains("paths")) {
      for (const auto& [k, v] : j["paths"].items()) c.paths[k] = resolve(base_dir, v.get<std::string>());
    }
    if (j.contains("synth")) c.synth = SynthSpec::from_json(j["synth"]);
    if (j.contains("window")) {
      const auto& w = j["window"];
      reject_unknown(w, {"start", "end"}, "window.");
      features::StudyWindow win{parse_iso8601(w.at("start").get<std::string>()),
                                parse_iso8601(w.at("end").get<std::string>())};
      win.validate();
      c.window = win;
    }
    if (j.contains("snap_threshold_m")) {
      c.snap_threshold_m = j["snap_threshold_m"].get<double>();
      if (!(c.snap_threshold_m > 0)) throw SchemaError("config: snap_threshold_m must be positive");
    }
    if (j.contains("initial_occupancy")) {
      for (const auto& [k, v] : j["initial_occupancy"].items()) {
        c.initial_occupancy[static_cast<int>(std::stol(k))] = v.get<int>();
      }
    }
    if (j.contains("split")) {
      const auto& s = j["split"];
      reject_unknown(s, {"mode", "train_ratio"}, "split.");
      if (s.contains("mode")) c.split_mode = evaltune::parse_split_mode(s["mode"].get<std::string>());
      if (s.contains("train_ratio")) c.train_ratio = s["train_ratio"].get<double>();
      if (!(c.train_ratio > 0 && c.train_ratio < 1)) throw SchemaError("config: split.train_ratio must lie in (0, 1)");
    }
    if (j.contains("cv")) {
      const auto& s = j["cv"];
      reject_unknown(s, {"k", "mode"}, "cv.");
      if (s.contains("k")) c.cv.k = s["k"].get<int>();
      if (s.contains("mode")) c.cv.mode = evaltune::parse_split_mode(s["mode"].get<std::string>());
      if (c.cv.k < 2) throw SchemaError("config: cv.k must be at least 2");
    }
    if (j.contains("search")) {
      const auto& s = j["search"];
      reject_unknown(s, {"kind", "budget"}, "search.");
      if (s.contains("kind")) {
        const auto kind = s["kind"].get<std::string>();
        if (kind == "grid") c.search = evaltune::SearchKind::grid;
        else if (kind == "random") c.search = evaltune::SearchKind::random;
        else throw SchemaError("config: search.kind must be grid or random");
      }
      if (s.contains("budget")) c.budget = s["budget"].get<int>();
      if (c.budget < 1) throw SchemaError("config: search.budget must be positive");
    }
    if (j.contains("families")) {
      c.families.clear();
      for (const auto& f : j["families"]) c.families.push_back(models::parse_family(f.get<std::string>()));
      if (c.families.empty()) throw SchemaError("config: families is empty");
    }
    if (j.contains("grids")) {
      for (const auto& [k, v] : j["grids"].items()) c.grids[models::parse_family(k)] = evaltune::SearchSpace::from_json(v);
    }
    if (j.contains("hyperparameters")) {
      for (const auto& [k, v] : j["hyperparameters"].items()) {
        const auto family = models::parse_family(k);
        c.hyperparameters[family] = models::resolve_hyperparameters(family, ordered_json::parse(v.dump()));
      }
    }
    if (j.contains("train_family")) c.train_family = models::parse_family(j["train_family"].get<std::string>());
    if (j.contains("vehicle_scale") && !j["vehicle_scale"].is_null()) {
      c.vehicle_scale = j["vehicle_scale"].get<double>();
      if (!(*c.vehicle_scale > 0)) throw SchemaError("config: vehicle_scale must be positive");
    }
    if (j.contains("service")) {
      if (!j["service"].is_object()) throw SchemaError("config: service must be an object");
      c.service = ordered_json::parse(j["service"].dump());
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("config: ") + e.what());
  } catch (const ArgumentError& e) {
    throw SchemaError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw SchemaError("config: initial_occupancy keys must be section ids");
  }
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& file) {
  const std::string text = read_file(file);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("config '" + file.string() + "': " + e.what(), e.byte);
  }
  return from_json(j, file.parent_path());
}

}  // namespace parkcast::pipeline
