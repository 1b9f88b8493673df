#include "parkcast/pipeline/stages.hpp"

#include <cstdio>
#include <map>

#include "parkcast/common/csv.hpp"
#include "parkcast/common/error.hpp"
#include "parkcast/common/fingerprint.hpp"
#include "parkcast/evaltune/metrics.hpp"
#include "parkcast/evaltune/report.hpp"
#include "parkcast/features/correlation.hpp"
#include "parkcast/spatial/spatial.hpp"

namespace parkcast::pipeline {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

ordered_json Manifest::to_json() const {
  ordered_json j = ordered_json::object();
  j["tool"] = kToolName;
  j["version"] = tool_version();
  j["stage"] = stage;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  ordered_json in = ordered_json::object();
  for (const auto& [k, v] : inputs) in[k] = v;
  j["inputs"] = std::move(in);
  if (!output_fingerprint.empty()) j["output_fingerprint"] = output_fingerprint;
  return j;
}

Manifest Manifest::from_json(const json& j) {
  try {
    Manifest m;
    m.stage = j.at("stage").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [k, v] : j.at("inputs").items()) m.inputs[k] = v.get<std::string>();
    m.output_fingerprint = j.value("output_fingerprint", std::string());
    return m;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("manifest: ") + e.what());
  }
}

fs::path manifest_path(const fs::path& artifact) { return fs::path(artifact.string() + ".manifest.json"); }

void write_text_artifact(const fs::path& path, const std::string& content, Manifest manifest) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  manifest.output_fingerprint = fingerprint_of(content);
  write_file(path, content);
  write_file(manifest_path(path), manifest.to_json().dump(2) + "\n");
}

LoadedArtifact read_artifact(const fs::path& path) {
  LoadedArtifact a;
  a.content = read_file(path);
  a.fingerprint = fingerprint_of(a.content);
  const fs::path mp = manifest_path(path);
  if (fs::exists(mp)) {
    json j;
    try {
      j = json::parse(read_file(mp));
    } catch (const json::parse_error& e) {
      throw ParseError("manifest '" + mp.string() + "': " + e.what(), e.byte);
    }
    const Manifest m = Manifest::from_json(j);
    if (!m.output_fingerprint.empty() && m.output_fingerprint != a.fingerprint) {
      throw FingerprintMismatch("artifact '" + path.string() + "' does not match its manifest", m.output_fingerprint,
                                a.fingerprint);
    }
  }
  return a;
}

ordered_json StageResult::to_json() const {
  ordered_json j = ordered_json::object();
  j["stage"] = stage;
  ordered_json outs = ordered_json::array();
  for (const auto& p : outputs) outs.push_back(p.string());
  j["outputs"] = std::move(outs);
  j["summary"] = summary;
  return j;
}

namespace {

Manifest manifest_for(const PipelineConfig& config, std::string stage) {
  Manifest m;
  m.stage = std::move(stage);
  m.config_hash = config.hash();
  m.seed = config.seed;
  return m;
}

void write_json_artifact(const fs::path& path, ordered_json body, const Manifest& manifest) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  ordered_json j = ordered_json::object();
  j["manifest"] = manifest.to_json();
  for (auto& [k, v] : body.items()) j[k] = std::move(v);
  write_file(path, j.dump(2) + "\n");
}

std::map<int, int> effective_initial_occupancy(const PipelineConfig& config) {
  return config.initial_occupancy.empty() ? config.synth.initial_occupancy : config.initial_occupancy;
}

ordered_json nullable(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

}  // namespace

geo::Campus load_campus_file(const fs::path& path) {
  const std::string text = read_file(path);
  return geo::load_campus(text);
}

LoadedDataset load_dataset(const fs::path& csv_path, const fs::path& sidecar_path) {
  LoadedDataset d;
  const auto csv_artifact = read_artifact(csv_path);
  d.csv_fingerprint = csv_artifact.fingerprint;
  d.sidecar = features::Sidecar::parse(read_file(sidecar_path));
  d.sidecar_fingerprint = d.sidecar.fingerprint();
  if (d.sidecar.dataset_csv_fingerprint != d.csv_fingerprint) {
    throw FingerprintMismatch("sidecar '" + sidecar_path.string() + "' describes a different dataset",
                              d.sidecar.dataset_csv_fingerprint, d.csv_fingerprint);
  }
  d.rows = features::read_dataset_csv(csv_artifact.content);
  d.train = d.sidecar.encoder.encode(d.rows.train);
  d.test = d.sidecar.encoder.encode(d.rows.test);
  d.y_train = features::targets(d.rows.train);
  d.y_test = features::targets(d.rows.test);
  return d;
}

StageResult run_synth(const PipelineConfig& config) {
  const SynthOutput out = generate_synthetic(config.synth, config.seed);
  StageResult r{"synth", {}, {}};
  const fs::path campus_path = config.path("campus", "campus.geojson");
  const fs::path obs_path = config.path("observations", "observations.csv");
  const fs::path truth_path = config.path("ground_truth", "ground_truth.csv");

  const std::string campus_text = geo::to_geojson(out.campus);
  write_text_artifact(campus_path, campus_text, manifest_for(config, "synth"));
  Manifest m = manifest_for(config, "synth");
  m.inputs["campus"] = fingerprint_of(campus_text);
  write_text_artifact(obs_path, spatial::write_observations_csv(out.observations), m);
  write_text_artifact(truth_path, write_ground_truth_csv(out.truth), m);
  r.outputs = {campus_path, obs_path, truth_path};
  r.summary = {{"observations", out.observations.size()},
               {"ground_truth_rows", out.truth.size()},
               {"total_capacity", out.campus.total_capacity()}};
  return r;
}

StageResult run_ingest(const PipelineConfig& config, const fs::path& raw) {
  const auto artifact = read_artifact(raw);
  const auto parsed = spatial::parse_observations_csv(artifact.content);
  if (parsed.observations.empty() && !parsed.errors.empty()) {
    std::vector<Violation> v;
    for (const auto& e : parsed.errors) v.push_back({"row " + std::to_string(e.row), "malformed", e.message});
    throw ValidationError(std::move(v));
  }
  Manifest m = manifest_for(config, "ingest");
  m.inputs["raw_observations"] = artifact.fingerprint;
  const fs::path obs_path = config.path("observations", "observations.csv");
  const fs::path rejected_path = config.path("ingest_rejected", "ingest_rejected.csv");
  write_text_artifact(obs_path, spatial::write_observations_csv(parsed.observations), m);
  csv::Table rejected;
  rejected.header = {"row", "error"};
  for (const auto& e : parsed.errors) rejected.rows.push_back({std::to_string(e.row), e.message});
  write_text_artifact(rejected_path, csv::render(rejected), m);
  StageResult r{"ingest", {obs_path, rejected_path}, {}};
  r.summary = {{"accepted", parsed.observations.size()}, {"rejected", parsed.errors.size()}};
  return r;
}

StageResult run_join(const PipelineConfig& config) {
  const fs::path campus_path = config.path("campus", "campus.geojson");
  const fs::path obs_path = config.path("observations", "observations.csv");
  const auto campus_artifact = read_artifact(campus_path);
  const geo::Campus campus = geo::load_campus(campus_artifact.content);
  const auto obs_artifact = read_artifact(obs_path);
  const auto observations = spatial::read_observations_csv(obs_artifact.content);
  const auto joined = spatial::spatial_join(observations, campus, config.snap_threshold_m);

  Manifest m = manifest_for(config, "join");
  m.inputs["campus"] = campus_artifact.fingerprint;
  m.inputs["observations"] = obs_artifact.fingerprint;
  const fs::path joined_path = config.path("joined", "joined.csv");
  write_text_artifact(joined_path, spatial::write_joined_csv(joined), m);

  std::size_t snapped = 0, in_section = 0;
  for (const auto& j : joined) {
    snapped += j.segment_id.has_value();
    in_section += j.section_id.has_value();
  }
  StageResult r{"join", {joined_path}, {}};
  r.summary = {{"observations", joined.size()}, {"snapped", snapped}, {"in_section", in_section}};
  return r;
}

StageResult run_build_dataset(const PipelineConfig& config) {
  const fs::path campus_path = config.path("campus", "campus.geojson");
  const fs::path joined_path = config.path("joined", "joined.csv");
  const auto campus_artifact = read_artifact(campus_path);
  const geo::Campus campus = geo::load_campus(campus_artifact.content);
  const auto joined_artifact = read_artifact(joined_path);
  const auto joined = spatial::read_joined_csv(joined_artifact.content);

  features::AggregationOptions opts;
  opts.initial_occupancy = effective_initial_occupancy(config);
  const auto aggregated = features::aggregate_hourly(joined, campus, config.study_window(), opts);
  const auto cleaned = features::clean(aggregated);
  const auto& rows = cleaned.rows;
  const auto plan = evaltune::train_test_split(rows.size(), config.train_ratio, config.split_mode, config.seed);
  std::vector<features::FeatureRow> train, test;
  for (const auto i : plan.train) train.push_back(rows[i]);
  for (const auto i : plan.test) test.push_back(rows[i]);
  const auto n_segments = static_cast<int>(campus.gates.size());
  const auto ds = features::encode_and_scale(train, test, n_segments);

  Manifest m = manifest_for(config, "build-dataset");
  m.inputs["campus"] = campus_artifact.fingerprint;
  m.inputs["joined"] = joined_artifact.fingerprint;
  const fs::path aggregated_path = config.path("aggregated", "aggregated.csv");
  const fs::path dataset_path = config.path("dataset", "dataset.csv");
  const fs::path sidecar_path = config.path("sidecar", "dataset.sidecar.json");
  write_text_artifact(aggregated_path, features::write_rows_csv(aggregated), m);
  const std::string dataset_text = features::write_dataset_csv(ds.train_rows, ds.test_rows);
  write_text_artifact(dataset_path, dataset_text, m);

  const auto& rep = cleaned.report;
  const ordered_json clean_json = {{"input_rows", rep.input_rows},
                                   {"duplicates_removed", rep.duplicates_removed},
                                   {"missing_target_dropped", rep.missing_target_dropped},
                                   {"out_of_range_dropped", rep.out_of_range_dropped},
                                   {"output_rows", rep.output_rows}};
  features::Sidecar sidecar;
  sidecar.encoder = ds.encoder;
  sidecar.provenance = m.to_json();
  sidecar.provenance["clean"] = clean_json;
  sidecar.split = {{"mode", evaltune::to_string(config.split_mode)},
                   {"train_ratio", config.train_ratio},
                   {"seed", config.seed},
                   {"n_train", train.size()},
                   {"n_test", test.size()}};
  sidecar.dataset_csv_fingerprint = fingerprint_of(dataset_text);
  write_file(sidecar_path, sidecar.to_json_text());

  StageResult r{"build-dataset", {aggregated_path, dataset_path, sidecar_path}, {}};
  r.summary = {{"aggregated_rows", aggregated.size()},
               {"clean", clean_json},
               {"n_train", train.size()},
               {"n_test", test.size()},
               {"sidecar_fingerprint", sidecar.fingerprint()}};
  return r;
}

StageResult run_analyze(const PipelineConfig& config) {
  const fs::path dataset_path = config.path("dataset", "dataset.csv");
  const auto artifact = read_artifact(dataset_path);
  const auto split = features::read_dataset_csv(artifact.content);
  std::vector<features::FeatureRow> rows = split.train;
  rows.insert(rows.end(), split.test.begin(), split.test.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return std::pair(a.timestamp, a.segment_no) < std::pair(b.timestamp, b.segment_no);
  });

  std::vector<double> avail;
  for (const auto& r : rows) avail.push_back(*r.availability);
  const std::vector<std::pair<std::string, double features::FeatureRow::*>> doubles = {
      {"distance", &features::FeatureRow::distance}, {"travel_speed", &features::FeatureRow::travel_speed}};
  const std::vector<std::pair<std::string, int features::FeatureRow::*>> ints = {
      {"n_vehicles", &features::FeatureRow::n_vehicles}, {"n_vehicles_exit", &features::FeatureRow::n_vehicles_exit}};
  std::vector<std::pair<std::string, std::vector<double>>> series;
  for (const auto& [name, field] : doubles) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r.*field);
    series.emplace_back(name, std::move(v));
  }
  for (const auto& [name, field] : ints) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r.*field);
    series.emplace_back(name, std::move(v));
  }
  {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(hour_of_day(r.timestamp));
    series.emplace_back("hour", std::move(v));
  }

  ordered_json pairs = ordered_json::array();
  for (const auto& [name, v] : series) {
    ordered_json o = {{"x", name}, {"y", "availability"}, {"n", rows.size()}};
    try {
      const auto c = features::correlate(v, avail, name, "availability");
      o["r"] = nullable(c.r);
      o["rho"] = nullable(c.rho);
      o["p_value"] = nullable(c.p_value);
    } catch (const Error& e) {
      o["r"] = nullptr;
      o["rho"] = nullptr;
      o["p_value"] = nullptr;
      o["error"] = e.what();
    }
    pairs.push_back(std::move(o));
  }

  // Per-hour means for plotting availability and flows over the day.
  std::map<int, std::array<double, 4>> by_hour;  // sum avail, sum in, sum out, count
  for (const auto& r : rows) {
    auto& acc = by_hour[hour_of_day(r.timestamp)];
    acc[0] += *r.availability;
    acc[1] += r.n_vehicles;
    acc[2] += r.n_vehicles_exit;
    acc[3] += 1;
  }
  csv::Table profile;
  profile.header = {"hour", "mean_availability", "mean_n_vehicles", "mean_n_vehicles_exit", "rows"};
  for (const auto& [h, acc] : by_hour) {
    profile.rows.push_back({std::to_string(h), csv::format_double(acc[0] / acc[3]), csv::format_double(acc[1] / acc[3]),
                            csv::format_double(acc[2] / acc[3]), std::to_string(static_cast<long>(acc[3]))});
  }

  Manifest m = manifest_for(config, "analyze");
  m.inputs["dataset"] = artifact.fingerprint;
  const fs::path corr_path = config.path("correlation", "correlation.json");
  const fs::path profile_path = config.path("hourly_profile", "hourly_profile.csv");
  write_json_artifact(corr_path, {{"correlations", pairs}}, m);
  write_text_artifact(profile_path, csv::render(profile), m);
  StageResult r{"analyze", {corr_path, profile_path}, {}};
  r.summary = {{"correlations", pairs}};
  return r;
}

namespace {

nlohmann::ordered_json hyperparameters_for(const PipelineConfig& config, models::Family family) {
  const auto it = config.hyperparameters.find(family);
  return it != config.hyperparameters.end() ? it->second : ordered_json::object();
}

void embed_manifest_in_model(const fs::path& path, const models::RegressionModel& model, const Manifest& m) {
  auto j = ordered_json::parse(models::model_to_json(model));
  j["manifest"] = m.to_json();
  write_file(path, j.dump(1) + "\n");
}

}  // namespace

StageResult run_train(const PipelineConfig& config, std::optional<models::Family> family_override) {
  const auto family = family_override.value_or(config.train_family);
  const fs::path dataset_path = config.path("dataset", "dataset.csv");
  const fs::path sidecar_path = config.path("sidecar", "dataset.sidecar.json");
  const auto ds = load_dataset(dataset_path, sidecar_path);

  models::FitRequest req;
  req.family = family;
  req.hyperparameters = hyperparameters_for(config, family);
  req.seed = config.seed;
  req.sidecar_fingerprint = ds.sidecar_fingerprint;
  const auto model = models::fit_model(req, ds.train, ds.y_train, &ds.test, &ds.y_test);

  Manifest m = manifest_for(config, "train");
  m.inputs["dataset"] = ds.csv_fingerprint;
  m.inputs["sidecar"] = ds.sidecar_fingerprint;
  const fs::path model_path = config.path("model", "model.json");
  if (model_path.has_parent_path()) fs::create_directories(model_path.parent_path());
  embed_manifest_in_model(model_path, model, m);
  StageResult r{"train", {model_path}, {}};
  if (family == models::Family::lstm) {
    csv::Table hist;
    hist.header = {"epoch", "train_mse", "test_mse"};
    for (std::size_t e = 0; e < model.history.train_mse.size(); ++e) {
      hist.rows.push_back({std::to_string(e + 1), csv::format_double(model.history.train_mse[e]),
                           e < model.history.test_mse.size() ? csv::format_double(model.history.test_mse[e]) : ""});
    }
    const fs::path hist_path = config.path("lstm_history", "lstm_history.csv");
    write_text_artifact(hist_path, csv::render(hist), m);
    r.outputs.push_back(hist_path);
  }
  const Eigen::VectorXd fitted = models::predict(model, ds.train);
  r.summary = {{"family", models::to_string(family)},
               {"hyperparameters", model.hyperparameters},
               {"defaults_taken", model.defaults_taken},
               {"train_rmse", evaltune::rmse(evaltune::as_span(ds.y_train), evaltune::as_span(fitted))},
               {"train_fingerprint", model.train_fingerprint}};
  return r;
}

StageResult run_tune(const PipelineConfig& config) {
  const fs::path dataset_path = config.path("dataset", "dataset.csv");
  const fs::path sidecar_path = config.path("sidecar", "dataset.sidecar.json");
  const auto ds = load_dataset(dataset_path, sidecar_path);
  evaltune::CvOptions cv = config.cv;
  cv.seed = config.seed;

  Manifest m = manifest_for(config, "tune");
  m.inputs["dataset"] = ds.csv_fingerprint;
  m.inputs["sidecar"] = ds.sidecar_fingerprint;
  StageResult r{"tune", {}, {}};
  ordered_json fams = ordered_json::object();
  for (const auto family : config.families) {
    const auto it = config.grids.find(family);
    const auto space = it != config.grids.end() ? it->second : evaltune::default_space(family);
    ordered_json entry = ordered_json::object();
    try {
      const auto result = config.search == evaltune::SearchKind::grid
                              ? evaltune::grid_search(family, space, ds.train, ds.y_train, cv)
                              : evaltune::random_search(family, space, config.budget, config.seed, ds.train,
                                                        ds.y_train, cv);
      const fs::path table_path = config.path("cv_" + models::to_string(family), "cv_" + models::to_string(family) + ".csv");
      write_text_artifact(table_path, evaltune::cv_table_csv(result), m);
      r.outputs.push_back(table_path);
      entry["best"] = result.best;
      entry["best_cv_rmse"] = result.best_score;
      entry["best_cell"] = result.best_index;
      entry["cells"] = result.table.size();
    } catch (const Error& e) {
      entry["error"] = e.what();
    }
    entry["space"] = space.to_json();
    fams[models::to_string(family)] = std::move(entry);
  }
  const fs::path tune_path = config.path("tune", "tune.json");
  write_json_artifact(tune_path, {{"search", config.search == evaltune::SearchKind::grid ? "grid" : "random"},
                                  {"cv_k", cv.k},
                                  {"cv_mode", evaltune::to_string(cv.mode)},
                                  {"families", fams}},
                      m);
  r.outputs.insert(r.outputs.begin(), tune_path);
  r.summary = {{"families", fams}};
  return r;
}

StageResult run_evaluate(const PipelineConfig& config) {
  const fs::path dataset_path = config.path("dataset", "dataset.csv");
  const fs::path sidecar_path = config.path("sidecar", "dataset.sidecar.json");
  const auto ds = load_dataset(dataset_path, sidecar_path);

  evaltune::CompareOptions opts;
  opts.cv = config.cv;
  opts.cv.seed = config.seed;
  opts.search = config.search;
  opts.budget = config.budget;
  opts.seed = config.seed;
  opts.vehicle_scale = config.vehicle_scale;
  opts.dataset_fingerprint = ds.csv_fingerprint;
  opts.sidecar_fingerprint = ds.sidecar_fingerprint;
  const auto result = evaltune::compare_models(ds.train, ds.y_train, ds.test, ds.y_test, config.families,
                                               config.grids, opts);

  Manifest m = manifest_for(config, "evaluate");
  m.inputs["dataset"] = ds.csv_fingerprint;
  m.inputs["sidecar"] = ds.sidecar_fingerprint;
  const fs::path report_path = config.path("report", "report.json");
  const fs::path table_path = config.path("report_table", "report.txt");
  write_json_artifact(report_path, result.report.to_json(), m);
  const std::string table = evaltune::render_table(result.report);
  write_text_artifact(table_path, table, m);
  StageResult r{"evaluate", {report_path, table_path}, {}};
  r.summary = result.report.to_json();
  r.summary["table"] = table;
  return r;
}

}  // namespace parkcast::pipeline
