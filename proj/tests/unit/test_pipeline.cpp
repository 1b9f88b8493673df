#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "parkcast/common/error.hpp"
#include "parkcast/common/fingerprint.hpp"
#include "parkcast/features/features.hpp"
#include "parkcast/pipeline/config.hpp"
#include "parkcast/pipeline/stages.hpp"
#include "parkcast/pipeline/synth.hpp"
#include "parkcast/spatial/spatial.hpp"

using namespace parkcast;

namespace {

double max_inversion_error(const pipeline::SynthSpec& spec, std::uint64_t seed) {
  const auto out = pipeline::generate_synthetic(spec, seed);
  const auto joined = spatial::spatial_join(out.observations, out.campus, spatial::kDefaultSnapThresholdM);
  features::AggregationOptions opts;
  opts.initial_occupancy = spec.initial_occupancy;
  const auto rows = features::aggregate_hourly(joined, out.campus, spec.window(), opts);
  std::map<std::pair<std::int64_t, int>, double> truth;
  for (const auto& t : out.truth) truth[{to_epoch(t.bucket), t.section_id}] = t.availability;
  double worst = 0.0;
  for (const auto& r : rows) {
    const int section = out.campus.home_section(r.segment_no);
    const double want = truth.at({to_epoch(r.timestamp), section});
    worst = std::max(worst, std::fabs(*r.availability - want));
  }
  return worst;
}

}  // namespace

TEST_CASE("noise-free synthetic traces invert to ground truth") {
  for (std::uint64_t seed : {1u, 2u, 3u}) CHECK(max_inversion_error(pipeline::default_synth_spec(), seed) < 1e-9);
}

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

pipeline::PipelineConfig small_config(const fs::path& out) {
  auto c = pipeline::PipelineConfig::from_json(nlohmann::ordered_json::parse(R"({
    "seed": 11,
    "families": ["linear", "rfr"],
    "grids": {"rfr": {"n_trees": [20], "min_samples_leaf": [1, 3]}},
    "hyperparameters": {"rfr": {"n_trees": 20}},
    "synth": {"noise_m": 3.0}
  })"));
  c.out = out;
  return c;
}

std::vector<fs::path> run_all(const pipeline::PipelineConfig& c) {
  std::vector<fs::path> outputs;
  for (const auto& r : {pipeline::run_synth(c), pipeline::run_join(c), pipeline::run_build_dataset(c),
                        pipeline::run_analyze(c), pipeline::run_train(c), pipeline::run_tune(c),
                        pipeline::run_evaluate(c)}) {
    outputs.insert(outputs.end(), r.outputs.begin(), r.outputs.end());
  }
  return outputs;
}

}  // namespace

TEST_CASE("config parsing rejects unknown keys and bad values") {
  using nlohmann::ordered_json;
  CHECK_THROWS_AS(pipeline::PipelineConfig::from_json(ordered_json::parse(R"({"sede": 1})")), SchemaError);
  CHECK_THROWS_AS(pipeline::PipelineConfig::from_json(ordered_json::parse(R"({"split": {"ratio": 0.5}})")), SchemaError);
  CHECK_THROWS_AS(pipeline::PipelineConfig::from_json(ordered_json::parse(R"({"split": {"train_ratio": 1.5}})")), SchemaError);
  CHECK_THROWS_AS(pipeline::PipelineConfig::from_json(ordered_json::parse(R"({"families": ["gbm"]})")), SchemaError);
  CHECK_THROWS_AS(pipeline::PipelineConfig::from_json(ordered_json::parse(R"({"hyperparameters": {"svr": {"kernal": "rbf"}}})")),
                  SchemaError);
  const auto c = pipeline::PipelineConfig::from_json(
      ordered_json::parse(R"({"out": "runs/a", "paths": {"campus": "/abs/campus.geojson"}, "cv": {"k": 4}})"), "/cfg");
  CHECK(c.out == fs::path("/cfg/runs/a"));
  CHECK(c.path("campus", "campus.geojson") == fs::path("/abs/campus.geojson"));
  CHECK(c.path("observations", "observations.csv") == fs::path("/cfg/runs/a/observations.csv"));
  CHECK(c.cv.k == 4);
  // Output locations do not change the configuration hash.
  auto moved = c;
  moved.out = "/elsewhere";
  CHECK(moved.hash() == c.hash());
  moved.seed += 1;
  CHECK(moved.hash() != c.hash());
  CHECK(pipeline::PipelineConfig::from_json(ordered_json::parse(c.to_json().dump())).hash() == c.hash());
}

TEST_CASE("stage reruns are byte-identical") {
  TempDir a("parkcast_stages_a"), b("parkcast_stages_b");
  const auto outs_a = run_all(small_config(a.path));
  const auto outs_b = run_all(small_config(b.path));
  REQUIRE(outs_a.size() == outs_b.size());
  CHECK(outs_a.size() >= 12);
  for (std::size_t i = 0; i < outs_a.size(); ++i) {
    CHECK(outs_a[i].filename() == outs_b[i].filename());
    CHECK(read_file(outs_a[i]) == read_file(outs_b[i]));
    if (outs_a[i].extension() == ".csv") CHECK(fs::exists(pipeline::manifest_path(outs_a[i])));
  }
  const auto report = nlohmann::json::parse(read_file(a.path / "report.json"));
  CHECK(report["rows"].size() == 2);
  CHECK(report.contains("manifest"));
  CHECK(report["manifest"]["config_hash"] == small_config(a.path).hash());
}

TEST_CASE("tampered artifacts are refused") {
  TempDir dir("parkcast_stages_tamper");
  const auto c = small_config(dir.path);
  pipeline::run_synth(c);
  pipeline::run_join(c);
  pipeline::run_build_dataset(c);
  const auto csv = dir.path / "dataset.csv", sidecar = dir.path / "dataset.sidecar.json";
  CHECK_NOTHROW(pipeline::load_dataset(csv, sidecar));
  write_file(csv, read_file(csv) + "\n");
  CHECK_THROWS_AS(pipeline::load_dataset(csv, sidecar), FingerprintMismatch);
  const auto obs = dir.path / "observations.csv";
  write_file(obs, read_file(obs).substr(1));
  CHECK_THROWS_AS(pipeline::read_artifact(obs), FingerprintMismatch);
  CHECK_THROWS_AS(pipeline::run_join(c), FingerprintMismatch);
}

TEST_CASE("ingest splits accepted and rejected rows") {
  TempDir dir("parkcast_stages_ingest");
  auto c = small_config(dir.path);
  const auto raw = dir.path / "raw.csv";
  write_file(raw,
             "vehicle_key,lon,lat,timestamp_iso8601,speed_kmh\n"
             "v1,55.48,25.285,2022-09-05T07:00:00Z,20\n"
             "v2,555,25.285,2022-09-05T07:00:00Z,20\n");
  const auto r = pipeline::run_ingest(c, raw);
  CHECK(r.summary["accepted"] == 1);
  CHECK(r.summary["rejected"] == 1);
  CHECK(spatial::read_observations_csv(read_file(dir.path / "observations.csv")).size() == 1);
  write_file(raw, "vehicle_key,lon,lat,timestamp_iso8601,speed_kmh\nv2,555,25.285,2022-09-05T07:00:00Z,20\n");
  CHECK_THROWS_AS(pipeline::run_ingest(c, raw), ValidationError);
}

TEST_CASE("zero rates give an empty trace and constant occupancy") {
  auto spec = pipeline::default_synth_spec();
  for (auto& g : spec.arrival_rates) std::fill(g.begin(), g.end(), 0.0);
  for (auto& g : spec.departure_rates) std::fill(g.begin(), g.end(), 0.0);
  const auto out = pipeline::generate_synthetic(spec, 4);
  CHECK(out.observations.empty());
  REQUIRE_FALSE(out.truth.empty());
  for (const auto& t : out.truth) {
    const auto it = spec.initial_occupancy.find(t.section_id);
    CHECK(t.occupied == (it == spec.initial_occupancy.end() ? 0 : it->second));
  }
}

TEST_CASE("rates that overfill a section are rejected") {
  auto spec = pipeline::default_synth_spec();
  for (auto& g : spec.arrival_rates) std::fill(g.begin(), g.end(), 500.0);
  CHECK_THROWS_AS(pipeline::generate_synthetic(spec, 1), DomainError);
  spec = pipeline::default_synth_spec();
  spec.arrival_rates.pop_back();
  CHECK_THROWS_AS(pipeline::generate_synthetic(spec, 1), ArgumentError);
}

TEST_CASE("ground truth CSV round-trips") {
  const auto out = pipeline::generate_synthetic(pipeline::default_synth_spec(), 6);
  const auto text = pipeline::write_ground_truth_csv(out.truth);
  const auto back = pipeline::read_ground_truth_csv(text);
  REQUIRE(back.size() == out.truth.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].bucket == out.truth[i].bucket);
    CHECK(back[i].section_id == out.truth[i].section_id);
    CHECK(back[i].occupied == out.truth[i].occupied);
    CHECK(back[i].availability == out.truth[i].availability);
  }
  CHECK(pipeline::write_ground_truth_csv(back) == text);
}

TEST_CASE("same seed, same trace; different seed, different trace") {
  auto spec = pipeline::default_synth_spec();
  spec.noise_m = 5.0;
  const auto a = pipeline::generate_synthetic(spec, 3), b = pipeline::generate_synthetic(spec, 3),
             c = pipeline::generate_synthetic(spec, 4);
  CHECK(a.observations == b.observations);
  CHECK(a.observations != c.observations);
}
