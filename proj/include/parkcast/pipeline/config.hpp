#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "parkcast/evaltune/report.hpp"
#include "parkcast/evaltune/search.hpp"
#include "parkcast/evaltune/split.hpp"
#include "parkcast/features/features.hpp"
#include "parkcast/models/model.hpp"
#include "parkcast/pipeline/synth.hpp"

namespace parkcast::pipeline {

inline constexpr const char* kToolName = "parkcast";

std::string tool_version();

// Everything a pipeline run depends on. Relative paths resolve against the
// config file's directory; unset paths default to files inside `out`.
struct PipelineConfig {
  std::uint64_t seed = 42;
  std::filesystem::path out = "out";
  std::map<std::string, std::filesystem::path> paths;  // campus, observations, ...

  std::optional<features::StudyWindow> window;  // defaults to the synth window
  double snap_threshold_m = 30.0;
  std::map<int, int> initial_occupancy;

  evaltune::SplitMode split_mode = evaltune::SplitMode::chronological;
  double train_ratio = 0.7;
  evaltune::CvOptions cv;
  evaltune::SearchKind search = evaltune::SearchKind::grid;
  int budget = 10;
  std::vector<models::Family> families = models::all_families();
  std::map<models::Family, evaltune::SearchSpace> grids;
  std::map<models::Family, nlohmann::ordered_json> hyperparameters;
  models::Family train_family = models::Family::rfr;
  std::optional<double> vehicle_scale;

  SynthSpec synth = default_synth_spec();
  nlohmann::ordered_json service = nlohmann::ordered_json::object();

  // Path for a named artifact: the configured one or out/<default_name>.
  std::filesystem::path path(const std::string& key, const std::string& default_name) const;
  features::StudyWindow study_window() const;

  // Canonical JSON of every setting except `out` and `paths`.
  nlohmann::ordered_json to_json() const;
  std::string hash() const;

  // Throws SchemaError on unknown keys or wrong types.
  static PipelineConfig from_json(const nlohmann::ordered_json& j, const std::filesystem::path& base_dir = {});
  static PipelineConfig load(const std::filesystem::path& file);
};

}  // namespace parkcast::pipeline
