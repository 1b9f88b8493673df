#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "parkcast/evaltune/search.hpp"
#include "parkcast/models/model.hpp"

namespace parkcast::evaltune {

struct ReportRow {
  std::string model;  // display name
  std::optional<models::Family> family;
  double rmse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
  nlohmann::ordered_json hyperparameters = nlohmann::ordered_json::object();
  std::vector<std::string> defaults_taken;
  std::optional<double> cv_rmse;
  std::optional<double> rmse_vehicles;
  std::optional<double> mae_vehicles;
};

struct FamilyFailure {
  models::Family family;
  std::string error;
};

// One entry per test-set evaluation.
struct EvaluationLogEntry {
  models::Family family;
  std::string model_fingerprint;
  std::string test_fingerprint;
};

struct EvaluationReport {
  std::vector<ReportRow> rows;  // sorted by RMSE, largest first
  std::vector<FamilyFailure> failures;
  std::vector<EvaluationLogEntry> evaluation_log;
  std::string dataset_fingerprint;
  std::optional<double> vehicle_scale;
  nlohmann::ordered_json settings = nlohmann::ordered_json::object();

  nlohmann::ordered_json to_json() const;
  static EvaluationReport from_json(const nlohmann::ordered_json& j);
};

// Orders rows by RMSE descending; equal RMSE keeps the given order.
void sort_rows(std::vector<ReportRow>& rows);

// Aligned plain-text table with columns Model | RMSE | MAE | R², three
// decimals. An empty report renders the header only.
std::string render_table(const EvaluationReport& report);
std::string render_table(const std::vector<ReportRow>& rows);

enum class SearchKind { grid, random };

struct CompareOptions {
  CvOptions cv;
  SearchKind search = SearchKind::grid;
  int budget = 10;
  std::uint64_t seed = 0;
  std::optional<double> vehicle_scale;
  std::string dataset_fingerprint;
  std::string sidecar_fingerprint;
};

struct CompareResult {
  EvaluationReport report;
  std::vector<models::RegressionModel> models;  // refitted winners, report order
  std::map<models::Family, SearchResult> searches;
};

// Tunes each family by CV on the training partition, refits the winner on
// the whole training partition and scores it once on the test partition.
// A family whose search or refit fails is listed under failures.
CompareResult compare_models(const features::FeatureFrame& train, const Eigen::VectorXd& y_train,
                             const features::FeatureFrame& test, const Eigen::VectorXd& y_test,
                             const std::vector<models::Family>& families,
                             const std::map<models::Family, SearchSpace>& spaces, const CompareOptions& options);

}  // namespace parkcast::evaltune
