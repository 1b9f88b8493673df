#include "parkcast/evaltune/search.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "parkcast/common/csv.hpp"
#include "parkcast/common/error.hpp"
#include "parkcast/evaltune/metrics.hpp"

namespace parkcast::evaltune {

using json = nlohmann::ordered_json;
using nlohmann::ordered_json;

Dimension Dimension::choice(std::string name, std::vector<ordered_json> values) {
  Dimension d;
  d.name = std::move(name);
  d.kind = Kind::choice;
  d.values = std::move(values);
  return d;
}

Dimension Dimension::uniform(std::string name, double low, double high) {
  Dimension d;
  d.name = std::move(name);
  d.kind = Kind::uniform;
  d.low = low;
  d.high = high;
  return d;
}

Dimension Dimension::log_uniform(std::string name, double low, double high) {
  Dimension d = uniform(std::move(name), low, high);
  d.kind = Kind::log_uniform;
  return d;
}

Dimension Dimension::integer(std::string name, long low, long high) {
  Dimension d = uniform(std::move(name), static_cast<double>(low), static_cast<double>(high));
  d.kind = Kind::integer;
  return d;
}

namespace {

void check_dimension(const Dimension& d) {
  if (d.name.empty()) throw ArgumentError("search space: dimension without a name");
  switch (d.kind) {
    case Dimension::Kind::choice:
      if (d.values.empty()) throw ArgumentError("search space: '" + d.name + "' has no values");
      break;
    case Dimension::Kind::log_uniform:
      if (!(d.low > 0.0)) throw ArgumentError("search space: '" + d.name + "' log range must be positive");
      [[fallthrough]];
    case Dimension::Kind::uniform:
    case Dimension::Kind::integer:
      if (!(d.low <= d.high) || !std::isfinite(d.low) || !std::isfinite(d.high)) {
        throw ArgumentError("search space: '" + d.name + "' has an empty range");
      }
      break;
  }
}

}  // namespace

bool SearchSpace::is_grid() const {
  for (const auto& sub : subspaces) {
    for (const auto& d : sub) {
      if (d.kind != Dimension::Kind::choice) return false;
    }
  }
  return true;
}

std::vector<ordered_json> SearchSpace::grid_cells() const {
  if (!is_grid()) throw ArgumentError("grid search needs discrete value lists for every hyperparameter");
  if (subspaces.empty()) throw ArgumentError("search space is empty");
  std::vector<ordered_json> cells;
  for (const auto& sub : subspaces) {
    for (const auto& d : sub) check_dimension(d);
    std::size_t count = 1;
    for (const auto& d : sub) count *= d.values.size();
    for (std::size_t index = 0; index < count; ++index) {
      std::vector<std::size_t> pos(sub.size());
      std::size_t rest = index;
      for (std::size_t k = sub.size(); k-- > 0;) {
        pos[k] = rest % sub[k].values.size();
        rest /= sub[k].values.size();
      }
      ordered_json cell = ordered_json::object();
      for (std::size_t k = 0; k < sub.size(); ++k) cell[sub[k].name] = sub[k].values[pos[k]];
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

std::vector<ordered_json> SearchSpace::sample(int n, std::uint64_t seed) const {
  if (n < 1) throw ArgumentError("random search budget must be >= 1");
  if (subspaces.empty()) throw ArgumentError("search space is empty");
  for (const auto& sub : subspaces) {
    for (const auto& d : sub) check_dimension(d);
  }
  std::mt19937_64 rng(seed);
  std::vector<ordered_json> cells;
  for (int i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick_sub(0, subspaces.size() - 1);
    const auto& sub = subspaces[pick_sub(rng)];
    ordered_json cell = ordered_json::object();
    for (const auto& d : sub) {
      switch (d.kind) {
        case Dimension::Kind::choice: {
          std::uniform_int_distribution<std::size_t> pick(0, d.values.size() - 1);
          cell[d.name] = d.values[pick(rng)];
          break;
        }
        case Dimension::Kind::uniform: {
          std::uniform_real_distribution<double> u(d.low, d.high);
          cell[d.name] = d.low == d.high ? d.low : u(rng);
          break;
        }
        case Dimension::Kind::log_uniform: {
          std::uniform_real_distribution<double> u(std::log(d.low), std::log(d.high));
          cell[d.name] = d.low == d.high ? d.low : std::exp(u(rng));
          break;
        }
        case Dimension::Kind::integer: {
          std::uniform_int_distribution<long> u(static_cast<long>(d.low), static_cast<long>(d.high));
          cell[d.name] = u(rng);
          break;
        }
      }
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

ordered_json SearchSpace::to_json() const {
  ordered_json subs = ordered_json::array();
  for (const auto& sub : subspaces) {
    ordered_json dims = ordered_json::array();
    for (const auto& d : sub) {
      ordered_json j = {{"name", d.name}};
      switch (d.kind) {
        case Dimension::Kind::choice: j["values"] = d.values; break;
        case Dimension::Kind::uniform: j["uniform"] = {d.low, d.high}; break;
        case Dimension::Kind::log_uniform: j["log_uniform"] = {d.low, d.high}; break;
        case Dimension::Kind::integer:
          j["integer"] = {static_cast<long>(d.low), static_cast<long>(d.high)};
          break;
      }
      dims.push_back(std::move(j));
    }
    subs.push_back(std::move(dims));
  }
  return {{"subspaces", subs}, {"budget", budget}};
}

namespace {

std::vector<Dimension> subspace_from_json(const json& j) {
  std::vector<Dimension> dims;
  auto range = [](const json& r, const std::string& name) {
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number()) {
      throw SchemaError("search space: '" + name + "' range must be [low, high]");
    }
    return std::pair<double, double>{r[0].get<double>(), r[1].get<double>()};
  };
  if (j.is_object()) {
    // Shorthand: {"name": [values...], ...}
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!it.value().is_array()) throw SchemaError("search space: '" + it.key() + "' must list values");
      std::vector<ordered_json> values;
      for (const auto& v : it.value()) values.push_back(ordered_json::parse(v.dump()));
      dims.push_back(Dimension::choice(it.key(), std::move(values)));
    }
    return dims;
  }
  if (!j.is_array()) throw SchemaError("search space: a sub-space must be an object or an array of dimensions");
  for (const auto& d : j) {
    if (!d.is_object() || !d.contains("name") || !d["name"].is_string()) {
      throw SchemaError("search space: each dimension needs a name");
    }
    const std::string name = d["name"].get<std::string>();
    if (d.contains("values")) {
      if (!d["values"].is_array()) throw SchemaError("search space: '" + name + "' values must be an array");
      std::vector<ordered_json> values;
      for (const auto& v : d["values"]) values.push_back(ordered_json::parse(v.dump()));
      dims.push_back(Dimension::choice(name, std::move(values)));
    } else if (d.contains("uniform")) {
      const auto [lo, hi] = range(d["uniform"], name);
      dims.push_back(Dimension::uniform(name, lo, hi));
    } else if (d.contains("log_uniform")) {
      const auto [lo, hi] = range(d["log_uniform"], name);
      dims.push_back(Dimension::log_uniform(name, lo, hi));
    } else if (d.contains("integer")) {
      const auto [lo, hi] = range(d["integer"], name);
      dims.push_back(Dimension::integer(name, static_cast<long>(lo), static_cast<long>(hi)));
    } else {
      throw SchemaError("search space: '" + name + "' needs values, uniform, log_uniform or integer");
    }
  }
  return dims;
}

}  // namespace

SearchSpace SearchSpace::from_json(const json& j) {
  SearchSpace s;
  if (j.is_object() && j.contains("subspaces")) {
    if (!j["subspaces"].is_array()) throw SchemaError("search space: subspaces must be an array");
    for (const auto& sub : j["subspaces"]) s.subspaces.push_back(subspace_from_json(sub));
    if (j.contains("budget")) {
      if (!j["budget"].is_number_integer()) throw SchemaError("search space: budget must be an integer");
      s.budget = j["budget"].get<int>();
    }
  } else if (j.is_object()) {
    s.subspaces.push_back(subspace_from_json(j));
  } else if (j.is_array()) {
    for (const auto& sub : j) s.subspaces.push_back(subspace_from_json(sub));
  } else {
    throw SchemaError("search space: expected an object or array");
  }
  if (s.subspaces.empty()) throw SchemaError("search space is empty");
  return s;
}

SearchSpace default_space(models::Family family) {
  using D = Dimension;
  SearchSpace s;
  switch (family) {
    case models::Family::linear:
      s.subspaces.push_back({D::choice("penalty", {"l2"}), D::choice("lambda", {0.0, 0.01, 0.1, 1.0})});
      s.subspaces.push_back({D::choice("penalty", {"l1"}), D::choice("lambda", {0.001, 0.01, 0.1})});
      break;
    case models::Family::svr:
      s.subspaces.push_back({D::choice("kernel", {"linear"}), D::choice("C", {0.1, 1.0, 10.0}),
                             D::choice("epsilon", {0.01, 0.1})});
      s.subspaces.push_back({D::choice("kernel", {"rbf"}), D::choice("C", {0.1, 1.0, 10.0}),
                             D::choice("epsilon", {0.01, 0.1}), D::choice("gamma", {0.1, 1.0})});
      break;
    case models::Family::rfr:
      s.subspaces.push_back({D::choice("max_depth", {4, 8, 0}), D::choice("min_samples_leaf", {1, 2, 5})});
      break;
    case models::Family::lstm:
      s.subspaces.push_back({D::choice("lookback", {2, 3, 4}), D::choice("learning_rate", {1e-3, 1e-2})});
      break;
  }
  return s;
}

CellEvaluator model_evaluator(models::Family family, std::uint64_t seed) {
  return [family, seed](const ordered_json& params, const features::FeatureFrame& train, const Eigen::VectorXd& y,
                        const features::FeatureFrame& validate) {
    models::FitRequest req;
    req.family = family;
    req.hyperparameters = params;
    req.seed = seed;
    const models::RegressionModel m = models::fit_model(req, train, y);
    return models::predict(m, validate);
  };
}

SearchResult evaluate_cells(const std::vector<ordered_json>& cells, const CellEvaluator& evaluator,
                            const features::FeatureFrame& X, const Eigen::VectorXd& y, const CvOptions& cv) {
  if (cells.empty()) throw ArgumentError("search: no cells to evaluate");
  if (X.rows() != y.size()) throw ArgumentError("search: feature rows and targets differ in length");
  std::vector<std::size_t> all(static_cast<std::size_t>(X.rows()));
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto pairs = fold_pairs(kfold(all, cv.k, cv.mode, cv.seed), cv.mode);

  std::vector<features::FeatureFrame> fold_train, fold_val;
  std::vector<Eigen::VectorXd> fold_y, fold_yval;
  for (const auto& p : pairs) {
    fold_train.push_back(X.select_rows(p.train));
    fold_val.push_back(X.select_rows(p.validate));
    Eigen::VectorXd yt(static_cast<Eigen::Index>(p.train.size()));
    for (std::size_t i = 0; i < p.train.size(); ++i) yt[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(p.train[i])];
    Eigen::VectorXd yv(static_cast<Eigen::Index>(p.validate.size()));
    for (std::size_t i = 0; i < p.validate.size(); ++i) yv[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(p.validate[i])];
    fold_y.push_back(std::move(yt));
    fold_yval.push_back(std::move(yv));
  }

  SearchResult result;
  result.best_score = std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    CvCell cell;
    cell.index = c;
    cell.params = cells[c];
    try {
      double total = 0.0;
      for (std::size_t f = 0; f < pairs.size(); ++f) {
        const Eigen::VectorXd pred = evaluator(cells[c], fold_train[f], fold_y[f], fold_val[f]);
        const double e = rmse(as_span(fold_yval[f]), as_span(pred));
        if (!std::isfinite(e)) throw DomainError("validation RMSE is not finite");
        cell.fold_rmse.push_back(e);
        total += e;
      }
      cell.mean_rmse = total / static_cast<double>(pairs.size());
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
      cell.fold_rmse.clear();
      cell.mean_rmse = std::numeric_limits<double>::quiet_NaN();
    }
    if (cell.ok && (!found || cell.mean_rmse < result.best_score)) {
      found = true;
      result.best_score = cell.mean_rmse;
      result.best_index = c;
      result.best = cell.params;
    }
    result.table.push_back(std::move(cell));
  }
  if (!found) {
    throw SearchError("search: all " + std::to_string(cells.size()) + " cells failed; first error: " +
                      result.table.front().error);
  }
  return result;
}

SearchResult grid_search(models::Family family, const SearchSpace& space, const features::FeatureFrame& X,
                         const Eigen::VectorXd& y, const CvOptions& cv) {
  return evaluate_cells(space.grid_cells(), model_evaluator(family, cv.seed), X, y, cv);
}

SearchResult random_search(models::Family family, const SearchSpace& space, int budget, std::uint64_t seed,
                           const features::FeatureFrame& X, const Eigen::VectorXd& y, const CvOptions& cv) {
  return evaluate_cells(space.sample(budget, seed), model_evaluator(family, cv.seed), X, y, cv);
}

std::string cv_table_csv(const SearchResult& result) {
  std::size_t folds = 0;
  for (const auto& c : result.table) folds = std::max(folds, c.fold_rmse.size());
  csv::Table t;
  t.header = {"cell", "params"};
  for (std::size_t f = 0; f < folds; ++f) t.header.push_back("fold_" + std::to_string(f + 1) + "_rmse");
  t.header.insert(t.header.end(), {"mean_rmse", "status", "error"});
  for (const auto& c : result.table) {
    std::vector<std::string> row = {std::to_string(c.index), c.params.dump()};
    for (std::size_t f = 0; f < folds; ++f) row.push_back(f < c.fold_rmse.size() ? csv::format_double(c.fold_rmse[f]) : "");
    row.push_back(c.ok ? csv::format_double(c.mean_rmse) : "");
    row.push_back(c.ok ? (c.index == result.best_index ? "best" : "ok") : "failed");
    row.push_back(c.error);
    t.rows.push_back(std::move(row));
  }
  return csv::render(t);
}

}  // namespace parkcast::evaltune
