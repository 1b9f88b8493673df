#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "parkcast/common/time.hpp"
#include "parkcast/features/dataset.hpp"
#include "parkcast/geodata/campus.hpp"
#include "parkcast/models/model.hpp"
#include "parkcast/spatial/spatial.hpp"

namespace parkcast::service {

enum class OccupancyState { low, moderate, high };

std::string to_string(OccupancyState s);

struct Thresholds {
  double low = 0.5;    // rate below this is low
  double high = 0.85;  // rate above this is high; both bounds inclusive for moderate
};

// Throws DomainError unless rate lies in [0, 1].
OccupancyState occupancy_state(double rate, const Thresholds& thresholds = {});

struct SectionOccupancy {
  int section_id = 0;
  std::string name;
  int capacity = 0;
  int occupied = 0;
  double occupancy_rate = 0.0;
  OccupancyState state = OccupancyState::low;
};

// Immutable once published.
struct OccupancySnapshot {
  std::uint64_t version = 0;
  Timestamp timestamp;
  std::optional<Timestamp> flow_bucket;  // hour bucket of the latest flows
  std::map<int, int> influx;             // segment -> vehicles in flow_bucket
  std::map<int, int> outflux;
  std::vector<SectionOccupancy> sections;  // ascending id

  const SectionOccupancy* find(int section_id) const;
  nlohmann::ordered_json to_json() const;
};

struct PredictionRequest {
  int gate_id = 0;
  Timestamp arrival_time;
  std::optional<int> segment_id;

  // Throws SchemaError for missing or mistyped fields.
  static PredictionRequest from_json(const nlohmann::json& j);
};

struct SectionPrediction {
  int section_id = 0;
  int segment_id = 0;  // row the prediction was made for
  double availability = 0.0;
  int vacant = 0;
};

struct PredictionResponse {
  int recommended_section_id = 0;
  double predicted_availability = 0.0;
  int predicted_vacant = 0;
  OccupancyState occupancy_state = OccupancyState::low;
  std::string model_fingerprint;
  std::uint64_t snapshot_version = 0;
  std::vector<SectionPrediction> candidates;

  nlohmann::ordered_json to_json() const;
};

struct IngestResult {
  bool applied = false;
  std::vector<spatial::RowError> errors;
  std::vector<std::string> warnings;
  std::shared_ptr<const OccupancySnapshot> snapshot;
};

struct ServiceOptions {
  Thresholds thresholds;
  int first_hour = 7;  // serviceable arrival hours [first_hour, end_hour)
  int end_hour = 15;
  double snap_threshold_m = spatial::kDefaultSnapThresholdM;
  std::map<int, int> initial_occupancy;
};

// Startup settings: artifact paths plus listener and behaviour options.
struct ServiceConfig {
  std::filesystem::path model;
  std::filesystem::path sidecar;
  std::filesystem::path campus;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin = "*";
  ServiceOptions options;

  // Throws SchemaError on unknown keys or wrong types.
  static ServiceConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
};

// Request handling independent of transport. Reads run concurrently against
// the published snapshot; ingests are serialised and publish a fresh snapshot.
class ParkingService {
public:
  using Clock = std::function<Timestamp()>;

  // Throws FingerprintMismatch when the model was not trained against this
  // sidecar, naming both fingerprints.
  ParkingService(geo::Campus campus, models::RegressionModel model, features::Sidecar sidecar,
                 ServiceOptions options = {}, Clock clock = {});

  static std::unique_ptr<ParkingService> load(const ServiceConfig& config, Clock clock = {});

  nlohmann::ordered_json health() const;
  nlohmann::ordered_json sections() const;
  std::shared_ptr<const OccupancySnapshot> snapshot() const;

  // Throws LookupError for unknown gates or segments and ArgumentError for
  // arrival times outside the serviceable hours.
  PredictionResponse predict(const PredictionRequest& request) const;

  // The encoded row predict() feeds the model for `segment_id`.
  features::FeatureRow feature_row(int segment_id, Timestamp arrival_time, const OccupancySnapshot& snap) const;

  // All-or-nothing: a batch with any malformed or out-of-order row changes nothing.
  IngestResult ingest(std::span<const spatial::VehicleObservation> batch);

  const geo::Campus& campus() const noexcept { return campus_; }
  const models::RegressionModel& model() const noexcept { return model_; }
  const features::Sidecar& sidecar() const noexcept { return sidecar_; }
  const ServiceOptions& options() const noexcept { return options_; }
  const std::string& model_fingerprint() const noexcept { return model_.train_fingerprint; }

private:
  geo::Campus campus_;
  std::vector<spatial::Segment> segments_;
  models::RegressionModel model_;
  features::Sidecar sidecar_;
  ServiceOptions options_;
  Clock clock_;

  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const OccupancySnapshot> snapshot_;
  std::mutex ingest_mutex_;

  void publish(std::shared_ptr<const OccupancySnapshot> next);
};

}  // namespace parkcast::service
