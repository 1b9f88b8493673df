#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <span>
#include <string>
#include <vector>

#include "parkcast/features/features.hpp"

namespace parkcast::features {

// Encoded numeric matrix with named columns. `groups` optionally tags each
// row with a sequence key (the segment) for models that read history.
struct FeatureFrame {
  std::vector<std::string> columns;
  Eigen::MatrixXd values;
  std::vector<int> groups;

  Eigen::Index rows() const { return values.rows(); }
  FeatureFrame select_rows(std::span<const std::size_t> rows) const;
};

// Stable hash of a column layout.
std::string layout_hash(std::span<const std::string> columns);

// Standardises numeric columns with training statistics and one-hot encodes
// the segment. Zero-variance columns encode to 0.
class FeatureEncoder {
public:
  static const std::vector<std::string>& numeric_columns();

  // Fits mean / population stddev on `train`. Throws ArgumentError on an
  // empty training set.
  static FeatureEncoder fit(std::span<const FeatureRow> train, int n_segments, Timestamp reference_day);

  FeatureEncoder() = default;
  FeatureEncoder(int n_segments, Timestamp reference_day, std::vector<double> mean,
                 std::vector<double> stddev);

  FeatureFrame encode(std::span<const FeatureRow> rows) const;
  std::vector<std::string> columns() const;
  std::string layout_hash() const;

  // Raw numeric values of a row in numeric_columns() order.
  std::vector<double> raw_numeric(const FeatureRow& row) const;
  double scale(std::size_t column, double value) const;
  double unscale(std::size_t column, double value) const;

  int n_segments() const noexcept { return n_segments_; }
  Timestamp reference_day() const noexcept { return reference_day_; }
  const std::vector<double>& mean() const noexcept { return mean_; }
  const std::vector<double>& stddev() const noexcept { return stddev_; }

  nlohmann::ordered_json to_json() const;
  static FeatureEncoder from_json(const nlohmann::json& j);

private:
  int n_segments_ = 0;
  Timestamp reference_day_{};
  std::vector<double> mean_;
  std::vector<double> stddev_;
};

struct Dataset {
  std::vector<FeatureRow> train_rows;
  std::vector<FeatureRow> test_rows;
  FeatureEncoder encoder;
  FeatureFrame train;
  FeatureFrame test;
  Eigen::VectorXd y_train;
  Eigen::VectorXd y_test;
};

// Encodes both partitions with statistics from `train_rows` only. The
// reference day for the day index is the earliest training timestamp's day.
// Throws ArgumentError when a row has no target.
Dataset encode_and_scale(std::span<const FeatureRow> train_rows, std::span<const FeatureRow> test_rows,
                         int n_segments);

Eigen::VectorXd targets(std::span<const FeatureRow> rows);

// --- persistence -----------------------------------------------------------

// Rows as CSV with a leading `split` column ("train" / "test").
std::string write_dataset_csv(std::span<const FeatureRow> train, std::span<const FeatureRow> test);

struct DatasetRows {
  std::vector<FeatureRow> train;
  std::vector<FeatureRow> test;
};
DatasetRows read_dataset_csv(std::string_view text);

// Plain rows (no split column), e.g. cleaned aggregation output.
std::string write_rows_csv(std::span<const FeatureRow> rows);
std::vector<FeatureRow> read_rows_csv(std::string_view text);

// The sidecar is the serving contract: scaler statistics, column layout,
// provenance and the fingerprint of the CSV it describes.
struct Sidecar {
  FeatureEncoder encoder;
  nlohmann::ordered_json provenance = nlohmann::ordered_json::object();
  nlohmann::ordered_json split = nlohmann::ordered_json::object();
  std::string dataset_csv_fingerprint;

  // Hash over everything above; recomputed on load and checked.
  std::string fingerprint() const;
  std::string to_json_text() const;
  // Throws SchemaError on malformed input and FingerprintMismatch when the
  // stored fingerprint does not match the content.
  static Sidecar parse(std::string_view text);
};

}  // namespace parkcast::features
