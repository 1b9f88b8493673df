#include "parkcast/models/model.hpp"

#include <algorithm>
#include <cmath>

#include "parkcast/common/error.hpp"
#include "parkcast/common/fingerprint.hpp"

namespace parkcast::models {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(Family f) {
  switch (f) {
    case Family::linear: return "linear";
    case Family::svr: return "svr";
    case Family::rfr: return "rfr";
    case Family::lstm: return "lstm";
  }
  return "linear";
}

Family parse_family(const std::string& s) {
  if (s == "linear" || s == "lr") return Family::linear;
  if (s == "svr") return Family::svr;
  if (s == "rfr" || s == "forest") return Family::rfr;
  if (s == "lstm") return Family::lstm;
  throw ArgumentError("unknown model family '" + s + "' (expected linear, svr, rfr or lstm)");
}

std::string display_name(Family f) {
  switch (f) {
    case Family::linear: return "Linear Regression";
    case Family::svr: return "SVR";
    case Family::rfr: return "RFR";
    case Family::lstm: return "LSTM";
  }
  return "";
}

const std::vector<Family>& all_families() {
  static const std::vector<Family> f = {Family::linear, Family::svr, Family::lstm, Family::rfr};
  return f;
}

namespace {

const ordered_json& defaults_for(Family f) {
  static const ordered_json linear = {{"penalty", "l2"}, {"lambda", 0.01}};
  static const ordered_json svr = {{"kernel", "rbf"},     {"C", 1.0},          {"epsilon", 0.1},
                                   {"gamma", "scale"},    {"tolerance", 1e-3}, {"max_sweeps", 10000}};
  static const ordered_json rfr = {
      {"n_trees", 100}, {"max_depth", 0}, {"min_samples_leaf", 1}, {"max_features", 0}};
  static const ordered_json lstm = {
      {"units", 50}, {"epochs", 50}, {"batch_size", 72}, {"lookback", 3}, {"learning_rate", 1e-3}};
  switch (f) {
    case Family::linear: return linear;
    case Family::svr: return svr;
    case Family::rfr: return rfr;
    case Family::lstm: return lstm;
  }
  return linear;
}

double as_number(const ordered_json& h, const char* key) {
  const auto& v = h.at(key);
  if (!v.is_number()) throw ArgumentError(std::string("hyperparameter '") + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ArgumentError(std::string("hyperparameter '") + key + "' must be finite");
  return d;
}

int as_int(const ordered_json& h, const char* key) {
  const auto& v = h.at(key);
  if (v.is_null()) return 0;
  if (!v.is_number_integer() && !(v.is_number_float() && std::floor(v.get<double>()) == v.get<double>())) {
    throw ArgumentError(std::string("hyperparameter '") + key + "' must be an integer");
  }
  return static_cast<int>(v.get<double>());
}

std::string as_string(const ordered_json& h, const char* key) {
  const auto& v = h.at(key);
  if (!v.is_string()) throw ArgumentError(std::string("hyperparameter '") + key + "' must be a string");
  return v.get<std::string>();
}

ordered_json vec_json(const Eigen::VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

Eigen::VectorXd json_vec(const json& a) {
  if (!a.is_array()) throw SchemaError("model: expected a numeric array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!a[k].is_number()) throw SchemaError("model: expected a numeric array");
    v[static_cast<Eigen::Index>(k)] = a[k].get<double>();
  }
  return v;
}

const Eigen::MatrixXd& frame_matrix_check(const features::FeatureFrame& X) {
  if (static_cast<Eigen::Index>(X.columns.size()) != X.values.cols()) {
    throw ArgumentError("feature frame: column names and matrix width differ");
  }
  return X.values;
}

}  // namespace

ordered_json resolve_hyperparameters(Family family, const ordered_json& given, std::vector<std::string>* defaults_taken) {
  const ordered_json& defaults = defaults_for(family);
  if (!given.is_null() && !given.is_object()) throw ArgumentError("hyperparameters must be a JSON object");
  if (given.is_object()) {
    for (auto it = given.begin(); it != given.end(); ++it) {
      if (!defaults.contains(it.key())) {
        throw ArgumentError("unknown hyperparameter '" + it.key() + "' for " + to_string(family));
      }
    }
  }
  ordered_json out = ordered_json::object();
  for (auto it = defaults.begin(); it != defaults.end(); ++it) {
    if (given.is_object() && given.contains(it.key())) {
      out[it.key()] = given.at(it.key());
    } else {
      out[it.key()] = it.value();
      if (defaults_taken != nullptr) defaults_taken->push_back(it.key());
    }
  }
  switch (family) {
    case Family::linear:
      parse_penalty(as_string(out, "penalty"));
      if (as_number(out, "lambda") < 0) throw ArgumentError("lambda must be >= 0");
      break;
    case Family::svr:
      parse_kernel(as_string(out, "kernel"));
      as_number(out, "C");
      as_number(out, "epsilon");
      if (!(out["gamma"].is_string() && out["gamma"] == "scale")) as_number(out, "gamma");
      as_number(out, "tolerance");
      as_int(out, "max_sweeps");
      break;
    case Family::rfr:
      as_int(out, "n_trees");
      as_int(out, "max_depth");
      as_int(out, "min_samples_leaf");
      as_int(out, "max_features");
      break;
    case Family::lstm:
      as_int(out, "units");
      as_int(out, "epochs");
      as_int(out, "batch_size");
      as_int(out, "lookback");
      as_number(out, "learning_rate");
      break;
  }
  return out;
}

std::string training_fingerprint(Family family, const ordered_json& hyperparameters, std::uint64_t seed,
                                 const features::FeatureFrame& X, const Eigen::VectorXd& y) {
  Fingerprint fp;
  fp.add(std::string_view("train"));
  fp.add(std::string_view(to_string(family)));
  fp.add(std::string_view(hyperparameters.dump()));
  fp.add(seed);
  for (const auto& c : X.columns) fp.add(std::string_view(c));
  fp.add(static_cast<std::int64_t>(X.values.rows()));
  for (Eigen::Index r = 0; r < X.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < X.values.cols(); ++c) fp.add(X.values(r, c));
  }
  for (int g : X.groups) fp.add(static_cast<std::int64_t>(g));
  fp.add(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
  return fp.hex();
}

RegressionModel fit_model(const FitRequest& request, const features::FeatureFrame& train, const Eigen::VectorXd& y,
                          const features::FeatureFrame* validation, const Eigen::VectorXd* y_validation) {
  RegressionModel model;
  model.family = request.family;
  model.seed = request.seed;
  model.hyperparameters = resolve_hyperparameters(request.family, request.hyperparameters, &model.defaults_taken);
  model.feature_layout.columns = train.columns;
  model.feature_layout.hash = features::layout_hash(train.columns);
  model.feature_layout.sidecar_fingerprint = request.sidecar_fingerprint;
  model.train_fingerprint = training_fingerprint(request.family, model.hyperparameters, request.seed, train, y);
  const Eigen::MatrixXd& X = frame_matrix_check(train);
  if (X.rows() != y.size()) throw ArgumentError("fit: feature rows and targets differ in length");
  const ordered_json& h = model.hyperparameters;

  switch (request.family) {
    case Family::linear: {
      Regularization reg{parse_penalty(as_string(h, "penalty")), as_number(h, "lambda")};
      model.parameters = fit_linear(X, y, reg);
      break;
    }
    case Family::svr: {
      Kernel k;
      k.type = parse_kernel(as_string(h, "kernel"));
      k.gamma = h.at("gamma").is_string() ? 0.0 : as_number(h, "gamma");
      SvrOptions opt;
      opt.tolerance = as_number(h, "tolerance");
      opt.max_sweeps = as_int(h, "max_sweeps");
      model.parameters = fit_svr(X, y, as_number(h, "C"), as_number(h, "epsilon"), k, opt);
      break;
    }
    case Family::rfr: {
      ForestOptions opt;
      opt.n_trees = as_int(h, "n_trees");
      opt.max_depth = as_int(h, "max_depth");
      opt.min_samples_leaf = as_int(h, "min_samples_leaf");
      opt.max_features = as_int(h, "max_features");
      opt.seed = request.seed;
      model.parameters = fit_rfr(X, y, opt);
      break;
    }
    case Family::lstm: {
      LstmOptions opt;
      opt.units = as_int(h, "units");
      opt.epochs = as_int(h, "epochs");
      opt.batch_size = as_int(h, "batch_size");
      opt.lookback = as_int(h, "lookback");
      opt.learning_rate = as_number(h, "learning_rate");
      opt.seed = request.seed;
      if (X.rows() <= opt.lookback) {
        throw ArgumentError("fit_lstm: need more rows (" + std::to_string(X.rows()) + ") than the lookback (" +
                            std::to_string(opt.lookback) + ")");
      }
      const auto seqs = make_sequences(X, train.groups, opt.lookback);
      std::vector<Sequence> vseqs;
      std::vector<double> vy;
      if (validation != nullptr && y_validation != nullptr && validation->rows() > 0) {
        vseqs = make_sequences(frame_matrix_check(*validation), validation->groups, opt.lookback);
        vy.assign(y_validation->data(), y_validation->data() + y_validation->size());
      }
      const std::vector<double> ty(y.data(), y.data() + y.size());
      LstmFit fit = fit_lstm(seqs, ty, opt, vseqs, vy);
      model.parameters = std::move(fit.params);
      model.history = std::move(fit.history);
      break;
    }
  }
  return model;
}

Eigen::VectorXd predict(const RegressionModel& model, const features::FeatureFrame& X) {
  const auto& want = model.feature_layout.columns;
  if (X.columns != want) {
    std::vector<std::string> unexpected, missing, misplaced;
    for (const auto& c : X.columns) {
      if (std::find(want.begin(), want.end(), c) == want.end()) unexpected.push_back(c);
    }
    for (const auto& c : want) {
      if (std::find(X.columns.begin(), X.columns.end(), c) == X.columns.end()) missing.push_back(c);
    }
    for (std::size_t k = 0; k < std::min(want.size(), X.columns.size()); ++k) {
      if (want[k] != X.columns[k] && std::find(want.begin(), want.end(), X.columns[k]) != want.end()) {
        misplaced.push_back(X.columns[k]);
      }
    }
    auto list = [](const std::vector<std::string>& v) {
      std::string s;
      for (const auto& c : v) s += (s.empty() ? "" : ", ") + c;
      return s;
    };
    std::string msg = "feature layout mismatch";
    if (!unexpected.empty()) msg += "; unexpected columns: " + list(unexpected);
    if (!missing.empty()) msg += "; missing columns: " + list(missing);
    if (!misplaced.empty()) msg += "; misplaced columns: " + list(misplaced);
    throw SchemaError(msg);
  }
  const Eigen::MatrixXd& M = frame_matrix_check(X);
  return std::visit(
      [&](const auto& p) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LinearParams>) {
          return predict_linear(p, M);
        } else if constexpr (std::is_same_v<T, SvrParams>) {
          return predict_svr(p, M);
        } else if constexpr (std::is_same_v<T, ForestParams>) {
          return predict_forest(p, M);
        } else {
          const auto seqs = make_sequences(M, X.groups, p.lookback);
          return predict_lstm(p, seqs);
        }
      },
      model.parameters);
}

// --- serialization ----------------------------------------------------------

namespace {

constexpr int kFormatVersion = 1;

ordered_json params_json(const Parameters& params) {
  return std::visit(
      [](const auto& p) -> ordered_json {
        using T = std::decay_t<decltype(p)>;
        ordered_json j = ordered_json::object();
        if constexpr (std::is_same_v<T, LinearParams>) {
          j["weights"] = vec_json(p.weights);
          j["bias"] = p.bias;
          j["penalty"] = to_string(p.regularization.penalty);
          j["lambda"] = p.regularization.lambda;
        } else if constexpr (std::is_same_v<T, SvrParams>) {
          j["kernel"] = to_string(p.kernel.type);
          j["gamma"] = p.kernel.gamma;
          j["C"] = p.C;
          j["epsilon"] = p.epsilon;
          j["bias"] = p.bias;
          j["dual_objective"] = p.dual_objective;
          j["max_violation"] = p.max_violation;
          j["iterations"] = p.iterations;
          j["support_indices"] = p.support_indices;
          j["dual_coef"] = vec_json(p.dual_coef);
          ordered_json sv = ordered_json::array();
          for (Eigen::Index r = 0; r < p.support_vectors.rows(); ++r) {
            sv.push_back(vec_json(p.support_vectors.row(r).transpose()));
          }
          j["support_vectors"] = std::move(sv);
        } else if constexpr (std::is_same_v<T, ForestParams>) {
          j["n_features"] = p.n_features;
          j["n_trees"] = p.options.n_trees;
          j["max_depth"] = p.options.max_depth;
          j["min_samples_leaf"] = p.options.min_samples_leaf;
          j["max_features"] = p.options.max_features;
          j["bootstrap"] = p.options.bootstrap;
          j["seed"] = p.options.seed;
          ordered_json trees = ordered_json::array();
          for (const auto& t : p.trees) {
            ordered_json feature = ordered_json::array(), threshold = ordered_json::array(),
                         left = ordered_json::array(), right = ordered_json::array(),
                         value = ordered_json::array(), n = ordered_json::array();
            for (const auto& node : t.nodes) {
              feature.push_back(node.feature);
              threshold.push_back(node.threshold);
              left.push_back(node.left);
              right.push_back(node.right);
              value.push_back(node.value);
              n.push_back(node.n_samples);
            }
            trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left},
                             {"right", right},     {"value", value},         {"n_samples", n}});
          }
          j["trees"] = std::move(trees);
        } else {
          j["input_size"] = p.input_size;
          j["units"] = p.units;
          j["lookback"] = p.lookback;
          j["theta"] = vec_json(p.theta);
        }
        return j;
      },
      params);
}

Parameters params_from_json(Family family, const json& j) {
  switch (family) {
    case Family::linear: {
      LinearParams p;
      p.weights = json_vec(j.at("weights"));
      p.bias = j.at("bias").get<double>();
      p.regularization = {parse_penalty(j.at("penalty").get<std::string>()), j.at("lambda").get<double>()};
      return p;
    }
    case Family::svr: {
      SvrParams p;
      p.kernel.type = parse_kernel(j.at("kernel").get<std::string>());
      p.kernel.gamma = j.at("gamma").get<double>();
      p.C = j.at("C").get<double>();
      p.epsilon = j.at("epsilon").get<double>();
      p.bias = j.at("bias").get<double>();
      p.dual_objective = j.at("dual_objective").get<double>();
      p.max_violation = j.at("max_violation").get<double>();
      p.iterations = j.at("iterations").get<long>();
      p.support_indices = j.at("support_indices").get<std::vector<std::size_t>>();
      p.dual_coef = json_vec(j.at("dual_coef"));
      const auto& sv = j.at("support_vectors");
      const auto s = static_cast<Eigen::Index>(sv.size());
      const Eigen::Index width = s > 0 ? static_cast<Eigen::Index>(sv[0].size()) : 0;
      p.support_vectors.resize(s, width);
      for (Eigen::Index r = 0; r < s; ++r) {
        const Eigen::VectorXd row = json_vec(sv[static_cast<std::size_t>(r)]);
        if (row.size() != width) throw SchemaError("model: ragged support vectors");
        p.support_vectors.row(r) = row.transpose();
      }
      if (p.dual_coef.size() != s || p.support_indices.size() != static_cast<std::size_t>(s)) {
        throw SchemaError("model: support vector counts disagree");
      }
      return p;
    }
    case Family::rfr: {
      ForestParams p;
      p.n_features = j.at("n_features").get<int>();
      p.options.n_trees = j.at("n_trees").get<int>();
      p.options.max_depth = j.at("max_depth").get<int>();
      p.options.min_samples_leaf = j.at("min_samples_leaf").get<int>();
      p.options.max_features = j.at("max_features").get<int>();
      p.options.bootstrap = j.at("bootstrap").get<bool>();
      p.options.seed = j.at("seed").get<std::uint64_t>();
      for (const auto& t : j.at("trees")) {
        const auto feature = t.at("feature").get<std::vector<int>>();
        const auto threshold = t.at("threshold").get<std::vector<double>>();
        const auto left = t.at("left").get<std::vector<int>>();
        const auto right = t.at("right").get<std::vector<int>>();
        const auto value = t.at("value").get<std::vector<double>>();
        const auto n = t.at("n_samples").get<std::vector<int>>();
        const std::size_t m = feature.size();
        if (m == 0 || threshold.size() != m || left.size() != m || right.size() != m || value.size() != m ||
            n.size() != m) {
          throw SchemaError("model: malformed tree");
        }
        RegressionTree tree;
        for (std::size_t k = 0; k < m; ++k) {
          TreeNode node{feature[k], threshold[k], left[k], right[k], value[k], n[k]};
          if (!node.leaf()) {
            const auto bad = [m, k](int c) { return c <= static_cast<int>(k) || c >= static_cast<int>(m); };
            if (bad(node.left) || bad(node.right) || node.feature >= p.n_features) {
              throw SchemaError("model: tree node " + std::to_string(k) + " has invalid links");
            }
          }
          tree.nodes.push_back(node);
        }
        p.trees.push_back(std::move(tree));
      }
      if (p.trees.empty()) throw SchemaError("model: forest has no trees");
      return p;
    }
    case Family::lstm: {
      LstmParams p;
      p.input_size = j.at("input_size").get<int>();
      p.units = j.at("units").get<int>();
      p.lookback = j.at("lookback").get<int>();
      p.theta = json_vec(j.at("theta"));
      if (p.input_size < 1 || p.units < 1 || p.lookback < 1 ||
          p.theta.size() != LstmParams::size_for(p.input_size, p.units)) {
        throw SchemaError("model: LSTM parameter vector has the wrong size");
      }
      return p;
    }
  }
  throw SchemaError("model: unknown family");
}

}  // namespace

std::string model_to_json(const RegressionModel& model) {
  ordered_json j = ordered_json::object();
  j["format"] = "parkcast-model";
  j["version"] = kFormatVersion;
  j["family"] = to_string(model.family);
  j["hyperparameters"] = model.hyperparameters;
  j["defaults_taken"] = model.defaults_taken;
  j["seed"] = model.seed;
  j["feature_layout"] = {{"columns", model.feature_layout.columns},
                         {"hash", model.feature_layout.hash},
                         {"sidecar_fingerprint", model.feature_layout.sidecar_fingerprint}};
  j["train_fingerprint"] = model.train_fingerprint;
  j["parameters"] = params_json(model.parameters);
  if (model.family == Family::lstm) {
    j["history"] = {{"train_mse", model.history.train_mse}, {"test_mse", model.history.test_mse}};
  }
  return j.dump(1) + "\n";
}

RegressionModel model_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model: invalid JSON: ") + e.what(), e.byte);
  }
  try {
    if (!j.is_object() || j.value("format", "") != "parkcast-model") throw SchemaError("model: not a model document");
    const int version = j.at("version").get<int>();
    if (version != kFormatVersion) throw SchemaError("model: unsupported version " + std::to_string(version));
    RegressionModel m;
    m.family = parse_family(j.at("family").get<std::string>());
    // Key order feeds the training fingerprint, so keep the document's order.
    m.hyperparameters = ordered_json::parse(text).at("hyperparameters");
    m.defaults_taken = j.at("defaults_taken").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto& fl = j.at("feature_layout");
    m.feature_layout.columns = fl.at("columns").get<std::vector<std::string>>();
    m.feature_layout.hash = fl.at("hash").get<std::string>();
    m.feature_layout.sidecar_fingerprint = fl.at("sidecar_fingerprint").get<std::string>();
    if (features::layout_hash(m.feature_layout.columns) != m.feature_layout.hash) {
      throw SchemaError("model: feature layout hash does not match its columns");
    }
    m.train_fingerprint = j.at("train_fingerprint").get<std::string>();
    m.parameters = params_from_json(m.family, j.at("parameters"));
    if (j.contains("history")) {
      m.history.train_mse = j["history"].at("train_mse").get<std::vector<double>>();
      m.history.test_mse = j["history"].at("test_mse").get<std::vector<double>>();
    }
    return m;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("model: ") + e.what());
  } catch (const ArgumentError& e) {
    throw SchemaError(std::string("model: ") + e.what());
  }
}

}  // namespace parkcast::models
