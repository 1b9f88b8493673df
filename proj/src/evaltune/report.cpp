#include "parkcast/evaltune/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "parkcast/common/error.hpp"
#include "parkcast/common/fingerprint.hpp"
#include "parkcast/evaltune/metrics.hpp"

namespace parkcast::evaltune {

using json = nlohmann::ordered_json;
using nlohmann::ordered_json;

void sort_rows(std::vector<ReportRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) { return a.rmse > b.rmse; });
}

namespace {

std::size_t display_width(const std::string& s) {
  std::size_t w = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++w;
  }
  return w;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s + std::string(width - std::min(width, display_width(s)), ' ');
}

std::string pad_left(const std::string& s, std::size_t width) {
  return std::string(width - std::min(width, display_width(s)), ' ') + s;
}

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s(buf);
  if (s == "-0.000") s = "0.000";
  return s;
}

}  // namespace

std::string render_table(const std::vector<ReportRow>& rows) {
  const std::vector<std::string> header = {"Model", "RMSE", "MAE", "R²"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) cells.push_back({r.model, fixed3(r.rmse), fixed3(r.mae), fixed3(r.r2)});
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = display_width(header[c]);
    for (const auto& row : cells) width[c] = std::max(width[c], display_width(row[c]));
  }
  std::string out = "|";
  for (std::size_t c = 0; c < header.size(); ++c) {
    out += " " + (c == 0 ? pad_right(header[c], width[c]) : pad_left(header[c], width[c])) + " |";
  }
  out += "\n|";
  for (std::size_t c = 0; c < header.size(); ++c) {
    out += (c == 0 ? ":" : "") + std::string(width[c] + 1, '-') + (c == 0 ? "" : ":") + "|";
  }
  out += "\n";
  for (const auto& row : cells) {
    out += "|";
    for (std::size_t c = 0; c < row.size(); ++c) {
      out += " " + (c == 0 ? pad_right(row[c], width[c]) : pad_left(row[c], width[c])) + " |";
    }
    out += "\n";
  }
  return out;
}

std::string render_table(const EvaluationReport& report) { return render_table(report.rows); }

ordered_json EvaluationReport::to_json() const {
  ordered_json j = ordered_json::object();
  j["dataset_fingerprint"] = dataset_fingerprint;
  j["vehicle_scale"] = vehicle_scale ? ordered_json(*vehicle_scale) : ordered_json(nullptr);
  j["settings"] = settings;
  ordered_json rs = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json o = ordered_json::object();
    o["model"] = r.model;
    o["family"] = r.family ? ordered_json(models::to_string(*r.family)) : ordered_json(nullptr);
    o["rmse"] = r.rmse;
    o["mae"] = r.mae;
    o["r2"] = r.r2;
    o["cv_rmse"] = r.cv_rmse ? ordered_json(*r.cv_rmse) : ordered_json(nullptr);
    o["rmse_vehicles"] = r.rmse_vehicles ? ordered_json(*r.rmse_vehicles) : ordered_json(nullptr);
    o["mae_vehicles"] = r.mae_vehicles ? ordered_json(*r.mae_vehicles) : ordered_json(nullptr);
    o["hyperparameters"] = r.hyperparameters;
    o["defaults_taken"] = r.defaults_taken;
    rs.push_back(std::move(o));
  }
  j["rows"] = std::move(rs);
  ordered_json fs = ordered_json::array();
  for (const auto& f : failures) fs.push_back({{"family", models::to_string(f.family)}, {"error", f.error}});
  j["failures"] = std::move(fs);
  ordered_json log = ordered_json::array();
  for (const auto& e : evaluation_log) {
    log.push_back({{"family", models::to_string(e.family)},
                   {"model_fingerprint", e.model_fingerprint},
                   {"test_fingerprint", e.test_fingerprint}});
  }
  j["evaluation_log"] = std::move(log);
  return j;
}

EvaluationReport EvaluationReport::from_json(const json& j) {
  try {
    EvaluationReport r;
    r.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
    if (!j.at("vehicle_scale").is_null()) r.vehicle_scale = j["vehicle_scale"].get<double>();
    r.settings = ordered_json::parse(j.value("settings", json::object()).dump());
    auto opt = [](const json& o, const char* key) -> std::optional<double> {
      if (!o.contains(key) || o[key].is_null()) return std::nullopt;
      return o[key].get<double>();
    };
    for (const auto& o : j.at("rows")) {
      ReportRow row;
      row.model = o.at("model").get<std::string>();
      if (o.contains("family") && !o["family"].is_null()) row.family = models::parse_family(o["family"].get<std::string>());
      row.rmse = o.at("rmse").get<double>();
      row.mae = o.at("mae").get<double>();
      row.r2 = o.at("r2").get<double>();
      row.cv_rmse = opt(o, "cv_rmse");
      row.rmse_vehicles = opt(o, "rmse_vehicles");
      row.mae_vehicles = opt(o, "mae_vehicles");
      row.hyperparameters = ordered_json::parse(o.value("hyperparameters", json::object()).dump());
      row.defaults_taken = o.value("defaults_taken", std::vector<std::string>{});
      r.rows.push_back(std::move(row));
    }
    for (const auto& f : j.value("failures", json::array())) {
      r.failures.push_back({models::parse_family(f.at("family").get<std::string>()), f.at("error").get<std::string>()});
    }
    for (const auto& e : j.value("evaluation_log", json::array())) {
      r.evaluation_log.push_back({models::parse_family(e.at("family").get<std::string>()),
                                  e.at("model_fingerprint").get<std::string>(),
                                  e.at("test_fingerprint").get<std::string>()});
    }
    return r;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("report: ") + e.what());
  } catch (const ArgumentError& e) {
    throw SchemaError(std::string("report: ") + e.what());
  }
}

namespace {

std::string frame_fingerprint(const features::FeatureFrame& X, const Eigen::VectorXd& y) {
  Fingerprint fp;
  fp.add(std::string_view("test-partition"));
  for (const auto& c : X.columns) fp.add(std::string_view(c));
  for (Eigen::Index r = 0; r < X.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < X.values.cols(); ++c) fp.add(X.values(r, c));
  }
  fp.add(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
  return fp.hex();
}

}  // namespace

CompareResult compare_models(const features::FeatureFrame& train, const Eigen::VectorXd& y_train,
                             const features::FeatureFrame& test, const Eigen::VectorXd& y_test,
                             const std::vector<models::Family>& families,
                             const std::map<models::Family, SearchSpace>& spaces, const CompareOptions& options) {
  if (families.empty()) throw ArgumentError("compare_models: no model families given");
  if (test.rows() == 0) throw ArgumentError("compare_models: empty test partition");
  CompareResult result;
  EvaluationReport& report = result.report;
  report.dataset_fingerprint = options.dataset_fingerprint;
  report.vehicle_scale = options.vehicle_scale;
  report.settings = {{"cv_k", options.cv.k},
                     {"cv_mode", to_string(options.cv.mode)},
                     {"search", options.search == SearchKind::grid ? "grid" : "random"},
                     {"budget", options.budget},
                     {"seed", options.seed}};
  const std::string test_fp = frame_fingerprint(test, y_test);

  std::vector<std::pair<ReportRow, models::RegressionModel>> done;
  for (const auto family : families) {
    try {
      const auto it = spaces.find(family);
      const SearchSpace space = it != spaces.end() ? it->second : default_space(family);
      SearchResult search = options.search == SearchKind::grid
                                ? grid_search(family, space, train, y_train, options.cv)
                                : random_search(family, space, options.budget, options.seed, train, y_train, options.cv);

      models::FitRequest req;
      req.family = family;
      req.hyperparameters = search.best;
      req.seed = options.seed;
      req.sidecar_fingerprint = options.sidecar_fingerprint;
      models::RegressionModel model = models::fit_model(req, train, y_train, &test, &y_test);

      const Eigen::VectorXd pred = models::predict(model, test);
      report.evaluation_log.push_back({family, model.train_fingerprint, test_fp});

      ReportRow row;
      row.model = models::display_name(family);
      row.family = family;
      row.rmse = rmse(as_span(y_test), as_span(pred));
      row.mae = mae(as_span(y_test), as_span(pred));
      row.r2 = r2(as_span(y_test), as_span(pred));
      row.hyperparameters = model.hyperparameters;
      row.defaults_taken = model.defaults_taken;
      row.cv_rmse = search.best_score;
      if (options.vehicle_scale) {
        row.rmse_vehicles = denormalize_error(row.rmse, *options.vehicle_scale);
        row.mae_vehicles = denormalize_error(row.mae, *options.vehicle_scale);
      }
      result.searches.emplace(family, std::move(search));
      done.emplace_back(std::move(row), std::move(model));
    } catch (const Error& e) {
      report.failures.push_back({family, e.what()});
    }
  }
  std::stable_sort(done.begin(), done.end(), [](const auto& a, const auto& b) { return a.first.rmse > b.first.rmse; });
  for (auto& [row, model] : done) {
    report.rows.push_back(std::move(row));
    result.models.push_back(std::move(model));
  }
  return result;
}

}  // namespace parkcast::evaltune
