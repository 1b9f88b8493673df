#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <json.hpp>
#include <string>
#include <variant>
#include <vector>

#include "parkcast/features/dataset.hpp"
#include "parkcast/models/forest.hpp"
#include "parkcast/models/linear.hpp"
#include "parkcast/models/lstm.hpp"
#include "parkcast/models/svr.hpp"

namespace parkcast::models {

enum class Family { linear, svr, rfr, lstm };

std::string to_string(Family f);
Family parse_family(const std::string& s);
// Names used in result tables: "Linear Regression", "SVR", "LSTM", "RFR".
std::string display_name(Family f);
const std::vector<Family>& all_families();

struct FeatureLayout {
  std::vector<std::string> columns;
  std::string hash;
  std::string sidecar_fingerprint;
};

using Parameters = std::variant<LinearParams, SvrParams, ForestParams, LstmParams>;

struct RegressionModel {
  Family family = Family::linear;
  nlohmann::ordered_json hyperparameters = nlohmann::ordered_json::object();
  std::vector<std::string> defaults_taken;  // hyperparameters not given explicitly
  std::uint64_t seed = 0;
  Parameters parameters;
  FeatureLayout feature_layout;
  std::string train_fingerprint;
  LstmHistory history;  // LSTM only
};

// Fills every missing hyperparameter with its default and validates types.
// Returns the complete set; `defaults_taken` lists the filled keys.
nlohmann::ordered_json resolve_hyperparameters(Family family, const nlohmann::ordered_json& given,
                                               std::vector<std::string>* defaults_taken = nullptr);

struct FitRequest {
  Family family = Family::linear;
  nlohmann::ordered_json hyperparameters = nlohmann::ordered_json::object();
  std::uint64_t seed = 0;
  std::string sidecar_fingerprint;
};

// Fits any family on an encoded frame. For the LSTM, windows are built from
// `train.groups`; `validation`, when given, feeds its per-epoch test MSE.
RegressionModel fit_model(const FitRequest& request, const features::FeatureFrame& train, const Eigen::VectorXd& y,
                          const features::FeatureFrame* validation = nullptr,
                          const Eigen::VectorXd* y_validation = nullptr);

// Raw predictions, one per row. Throws SchemaError naming offending columns
// when X's layout differs from the model's.
Eigen::VectorXd predict(const RegressionModel& model, const features::FeatureFrame& X);

// Hash of everything the fit depends on.
std::string training_fingerprint(Family family, const nlohmann::ordered_json& hyperparameters, std::uint64_t seed,
                                 const features::FeatureFrame& X, const Eigen::VectorXd& y);

// Versioned JSON document.
std::string model_to_json(const RegressionModel& model);
// Throws SchemaError on malformed documents or unsupported versions.
RegressionModel model_from_json(std::string_view text);

}  // namespace parkcast::models
