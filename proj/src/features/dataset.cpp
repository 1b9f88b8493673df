#include "parkcast/features/dataset.hpp"

#include <cmath>

#include "parkcast/common/csv.hpp"
#include "parkcast/common/fingerprint.hpp"

namespace parkcast::features {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kSidecarVersion = 1;

const char* kDistanceDefinition =
    "mean road distance from each vehicle's first snapped sighting in the hour to the segment's "
    "terminal (expected) gate, measured along the segment";
const char* kTimestampEncoding = "hour_of_day (integer) and day_index (days since reference_day)";

}  // namespace

FeatureFrame FeatureFrame::select_rows(std::span<const std::size_t> rows) const {
  FeatureFrame out;
  out.columns = columns;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.values.row(static_cast<Eigen::Index>(i)) = values.row(static_cast<Eigen::Index>(rows[i]));
    if (!groups.empty()) out.groups.push_back(groups[rows[i]]);
  }
  return out;
}

std::string layout_hash(std::span<const std::string> columns) {
  Fingerprint fp;
  fp.add(std::string_view("feature-layout"));
  for (const auto& c : columns) fp.add(std::string_view(c));
  return fp.hex();
}

const std::vector<std::string>& FeatureEncoder::numeric_columns() {
  static const std::vector<std::string> cols = {"distance",   "hour_of_day",     "day_index",
                                                "travel_speed", "n_vehicles",    "n_vehicles_exit",
                                                "total_parking_space"};
  return cols;
}

FeatureEncoder::FeatureEncoder(int n_segments, Timestamp reference_day, std::vector<double> mean,
                               std::vector<double> stddev)
    : n_segments_(n_segments), reference_day_(reference_day), mean_(std::move(mean)), stddev_(std::move(stddev)) {
  if (n_segments_ < 1) throw ArgumentError("encoder needs at least one segment");
  if (mean_.size() != numeric_columns().size() || stddev_.size() != numeric_columns().size()) {
    throw ArgumentError("encoder statistics do not match the numeric columns");
  }
}

std::vector<double> FeatureEncoder::raw_numeric(const FeatureRow& r) const {
  return {r.distance,
          static_cast<double>(hour_of_day(r.timestamp)),
          static_cast<double>(day_index(reference_day_, r.timestamp)),
          r.travel_speed,
          static_cast<double>(r.n_vehicles),
          static_cast<double>(r.n_vehicles_exit),
          static_cast<double>(r.total_parking_space)};
}

FeatureEncoder FeatureEncoder::fit(std::span<const FeatureRow> train, int n_segments, Timestamp reference_day) {
  if (train.empty()) throw ArgumentError("cannot fit an encoder on zero rows");
  const std::size_t p = numeric_columns().size();
  FeatureEncoder probe(n_segments, reference_day, std::vector<double>(p, 0.0), std::vector<double>(p, 1.0));
  std::vector<double> mean(p, 0.0), sd(p, 0.0);
  for (const auto& r : train) {
    const auto v = probe.raw_numeric(r);
    for (std::size_t c = 0; c < p; ++c) mean[c] += v[c];
  }
  for (auto& m : mean) m /= static_cast<double>(train.size());
  for (const auto& r : train) {
    const auto v = probe.raw_numeric(r);
    for (std::size_t c = 0; c < p; ++c) sd[c] += (v[c] - mean[c]) * (v[c] - mean[c]);
  }
  for (std::size_t c = 0; c < p; ++c) {
    sd[c] = std::sqrt(sd[c] / static_cast<double>(train.size()));
    if (sd[c] <= 1e-12 * std::max(1.0, std::abs(mean[c]))) sd[c] = 0.0;
  }
  return FeatureEncoder(n_segments, reference_day, std::move(mean), std::move(sd));
}

double FeatureEncoder::scale(std::size_t c, double v) const {
  if (stddev_[c] == 0.0) return 0.0;
  return (v - mean_[c]) / stddev_[c];
}

double FeatureEncoder::unscale(std::size_t c, double v) const {
  if (stddev_[c] == 0.0) return mean_[c];
  return v * stddev_[c] + mean_[c];
}

std::vector<std::string> FeatureEncoder::columns() const {
  std::vector<std::string> cols = numeric_columns();
  for (int k = 1; k <= n_segments_; ++k) cols.push_back("segment_no=" + std::to_string(k));
  return cols;
}

std::string FeatureEncoder::layout_hash() const {
  const auto cols = columns();
  return features::layout_hash(cols);
}

FeatureFrame FeatureEncoder::encode(std::span<const FeatureRow> rows) const {
  const std::size_t p = numeric_columns().size();
  FeatureFrame f;
  f.columns = columns();
  f.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                   static_cast<Eigen::Index>(p) + n_segments_);
  f.groups.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.segment_no < 1 || r.segment_no > n_segments_) {
      throw ArgumentError("segment_no " + std::to_string(r.segment_no) + " outside 1.." +
                          std::to_string(n_segments_));
    }
    const auto raw = raw_numeric(r);
    const auto row = static_cast<Eigen::Index>(i);
    for (std::size_t c = 0; c < p; ++c) f.values(row, static_cast<Eigen::Index>(c)) = scale(c, raw[c]);
    f.values(row, static_cast<Eigen::Index>(p) + r.segment_no - 1) = 1.0;
    f.groups.push_back(r.segment_no);
  }
  return f;
}

ordered_json FeatureEncoder::to_json() const {
  ordered_json j;
  j["n_segments"] = n_segments_;
  j["reference_day"] = format_iso8601(reference_day_);
  j["numeric_columns"] = numeric_columns();
  j["mean"] = mean_;
  j["stddev"] = stddev_;
  return j;
}

FeatureEncoder FeatureEncoder::from_json(const json& j) {
  try {
    if (j.at("numeric_columns").get<std::vector<std::string>>() != numeric_columns()) {
      throw SchemaError("encoder numeric columns do not match this build");
    }
    return FeatureEncoder(j.at("n_segments").get<int>(), parse_iso8601(j.at("reference_day").get<std::string>()),
                          j.at("mean").get<std::vector<double>>(), j.at("stddev").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed encoder: ") + e.what());
  }
}

Eigen::VectorXd targets(std::span<const FeatureRow> rows) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].availability) throw ArgumentError("row " + std::to_string(i) + " has no availability target");
    y(static_cast<Eigen::Index>(i)) = *rows[i].availability;
  }
  return y;
}

Dataset encode_and_scale(std::span<const FeatureRow> train_rows, std::span<const FeatureRow> test_rows,
                         int n_segments) {
  if (train_rows.empty()) throw ArgumentError("training partition is empty");
  Timestamp ref = train_rows.front().timestamp;
  for (const auto& r : train_rows) ref = std::min(ref, r.timestamp);
  Dataset d;
  d.train_rows.assign(train_rows.begin(), train_rows.end());
  d.test_rows.assign(test_rows.begin(), test_rows.end());
  d.encoder = FeatureEncoder::fit(train_rows, n_segments, floor_day(ref));
  d.train = d.encoder.encode(train_rows);
  d.test = d.encoder.encode(test_rows);
  d.y_train = targets(train_rows);
  d.y_test = targets(test_rows);
  return d;
}

// --- CSV -------------------------------------------------------------------

namespace {

const std::vector<std::string> kRowHeader = {"timestamp",       "segment_no",          "distance",
                                             "travel_speed",    "n_vehicles",          "n_vehicles_exit",
                                             "total_parking_space", "availability"};

std::vector<std::string> row_fields(const FeatureRow& r) {
  return {format_iso8601(r.timestamp),
          std::to_string(r.segment_no),
          csv::format_double(r.distance),
          csv::format_double(r.travel_speed),
          std::to_string(r.n_vehicles),
          std::to_string(r.n_vehicles_exit),
          std::to_string(r.total_parking_space),
          r.availability ? csv::format_double(*r.availability) : ""};
}

FeatureRow parse_fields(const csv::Table& t, const std::vector<std::string>& r, std::size_t index) {
  try {
    FeatureRow row;
    row.timestamp = parse_iso8601(r[t.require("timestamp")]);
    row.segment_no = static_cast<int>(csv::parse_int(r[t.require("segment_no")]));
    row.distance = csv::parse_double(r[t.require("distance")]);
    row.travel_speed = csv::parse_double(r[t.require("travel_speed")]);
    row.n_vehicles = static_cast<int>(csv::parse_int(r[t.require("n_vehicles")]));
    row.n_vehicles_exit = static_cast<int>(csv::parse_int(r[t.require("n_vehicles_exit")]));
    row.total_parking_space = static_cast<int>(csv::parse_int(r[t.require("total_parking_space")]));
    const auto& a = r[t.require("availability")];
    if (!a.empty()) row.availability = csv::parse_double(a);
    return row;
  } catch (const ArgumentError& e) {
    throw SchemaError("dataset row " + std::to_string(index) + ": " + e.what());
  }
}

}  // namespace

std::string write_rows_csv(std::span<const FeatureRow> rows) {
  csv::Table t;
  t.header = kRowHeader;
  for (const auto& r : rows) t.rows.push_back(row_fields(r));
  return csv::render(t);
}

std::vector<FeatureRow> read_rows_csv(std::string_view text) {
  const auto t = csv::parse(text);
  std::vector<FeatureRow> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) out.push_back(parse_fields(t, t.rows[i], i));
  return out;
}

std::string write_dataset_csv(std::span<const FeatureRow> train, std::span<const FeatureRow> test) {
  csv::Table t;
  t.header = {"split"};
  t.header.insert(t.header.end(), kRowHeader.begin(), kRowHeader.end());
  for (const auto* part : {&train, &test}) {
    for (const auto& r : *part) {
      auto fields = row_fields(r);
      fields.insert(fields.begin(), part == &train ? "train" : "test");
      t.rows.push_back(std::move(fields));
    }
  }
  return csv::render(t);
}

DatasetRows read_dataset_csv(std::string_view text) {
  const auto t = csv::parse(text);
  const std::size_t split = t.require("split");
  DatasetRows out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& s = t.rows[i][split];
    auto row = parse_fields(t, t.rows[i], i);
    if (s == "train") {
      out.train.push_back(row);
    } else if (s == "test") {
      out.test.push_back(row);
    } else {
      throw SchemaError("dataset row " + std::to_string(i) + ": split must be train or test");
    }
  }
  return out;
}

// --- sidecar -----------------------------------------------------------------

namespace {

ordered_json sidecar_body(const Sidecar& s) {
  ordered_json j;
  j["format_version"] = kSidecarVersion;
  const auto cols = s.encoder.columns();
  j["layout"] = {{"columns", cols},
                 {"numeric_columns", FeatureEncoder::numeric_columns()},
                 {"one_hot", {{"source", "segment_no"}, {"width", s.encoder.n_segments()}}},
                 {"hash", s.encoder.layout_hash()}};
  j["encoder"] = s.encoder.to_json();
  j["distance_definition"] = kDistanceDefinition;
  j["timestamp_encoding"] = kTimestampEncoding;
  j["split"] = s.split;
  j["provenance"] = s.provenance;
  j["dataset_csv_fingerprint"] = s.dataset_csv_fingerprint;
  return j;
}

}  // namespace

std::string Sidecar::fingerprint() const { return fingerprint_of(sidecar_body(*this).dump()); }

std::string Sidecar::to_json_text() const {
  auto j = sidecar_body(*this);
  j["fingerprint"] = fingerprint();
  return j.dump(2) + "\n";
}

Sidecar Sidecar::parse(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed sidecar: ") + e.what(), e.byte);
  }
  Sidecar s;
  std::string stored;
  try {
    if (j.at("format_version").get<int>() != kSidecarVersion) throw SchemaError("unsupported sidecar version");
    s.encoder = FeatureEncoder::from_json(j.at("encoder"));
    s.split = j.value("split", ordered_json::object());
    s.provenance = j.value("provenance", ordered_json::object());
    s.dataset_csv_fingerprint = j.at("dataset_csv_fingerprint").get<std::string>();
    stored = j.at("fingerprint").get<std::string>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed sidecar: ") + e.what());
  }
  if (stored != s.fingerprint()) throw FingerprintMismatch("sidecar content", stored, s.fingerprint());
  return s;
}

}  // namespace parkcast::features
