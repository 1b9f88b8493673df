#pragma once

#include <filesystem>
#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "parkcast/features/dataset.hpp"
#include "parkcast/geodata/campus.hpp"
#include "parkcast/pipeline/config.hpp"

namespace parkcast::pipeline {

// Provenance attached to every artifact. CSV artifacts carry it in
// `<file>.manifest.json` together with the file's fingerprint; JSON artifacts
// embed it under "manifest".
struct Manifest {
  std::string stage;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;  // name -> fingerprint
  std::string output_fingerprint;              // sidecar manifests only

  nlohmann::ordered_json to_json() const;
  static Manifest from_json(const nlohmann::json& j);
};

std::filesystem::path manifest_path(const std::filesystem::path& artifact);

// Writes a CSV or other plain-text artifact and its manifest sidecar.
void write_text_artifact(const std::filesystem::path& path, const std::string& content, Manifest manifest);

struct LoadedArtifact {
  std::string content;
  std::string fingerprint;
};

// Reads a file and, when a manifest sidecar exists, checks the recorded
// fingerprint. Throws FingerprintMismatch naming both values.
LoadedArtifact read_artifact(const std::filesystem::path& path);

struct StageResult {
  std::string stage;
  std::vector<std::filesystem::path> outputs;
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();

  nlohmann::ordered_json to_json() const;
};

// Encoded partitions rebuilt from dataset.csv with the sidecar's scaler.
struct LoadedDataset {
  features::DatasetRows rows;
  features::Sidecar sidecar;
  features::FeatureFrame train;
  features::FeatureFrame test;
  Eigen::VectorXd y_train;
  Eigen::VectorXd y_test;
  std::string csv_fingerprint;
  std::string sidecar_fingerprint;
};

// Throws FingerprintMismatch when the sidecar does not describe the CSV.
LoadedDataset load_dataset(const std::filesystem::path& csv, const std::filesystem::path& sidecar);

geo::Campus load_campus_file(const std::filesystem::path& path);

StageResult run_synth(const PipelineConfig& config);
// Validates a raw observation CSV and writes the accepted rows; rejected rows
// go to ingest_rejected.csv with their zero-based row index.
StageResult run_ingest(const PipelineConfig& config, const std::filesystem::path& raw);
StageResult run_join(const PipelineConfig& config);
StageResult run_build_dataset(const PipelineConfig& config);
StageResult run_analyze(const PipelineConfig& config);
StageResult run_train(const PipelineConfig& config, std::optional<models::Family> family = std::nullopt);
StageResult run_tune(const PipelineConfig& config);
StageResult run_evaluate(const PipelineConfig& config);

}  // namespace parkcast::pipeline
