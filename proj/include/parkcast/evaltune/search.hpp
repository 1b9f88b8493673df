#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "parkcast/evaltune/split.hpp"
#include "parkcast/features/dataset.hpp"
#include "parkcast/models/model.hpp"

namespace parkcast::evaltune {

// One hyperparameter axis. `choice` axes list discrete values and are the
// only kind a grid may contain; the others are sampling ranges.
struct Dimension {
  enum class Kind { choice, uniform, log_uniform, integer };
  std::string name;
  Kind kind = Kind::choice;
  std::vector<nlohmann::ordered_json> values;  // choice
  double low = 0.0;                            // ranges, inclusive
  double high = 0.0;

  static Dimension choice(std::string name, std::vector<nlohmann::ordered_json> values);
  static Dimension uniform(std::string name, double low, double high);
  static Dimension log_uniform(std::string name, double low, double high);
  static Dimension integer(std::string name, long low, long high);
};

// A union of sub-spaces; each sub-space is the Cartesian product of its
// dimensions with the first declared dimension varying slowest.
struct SearchSpace {
  std::vector<std::vector<Dimension>> subspaces;
  int budget = 10;  // random search only

  bool is_grid() const;
  // Every grid cell in iteration order. Throws ArgumentError unless is_grid()
  // and the grid is nonempty.
  std::vector<nlohmann::ordered_json> grid_cells() const;
  // `budget` seeded draws: a sub-space uniformly, then each dimension.
  std::vector<nlohmann::ordered_json> sample(int budget, std::uint64_t seed) const;

  nlohmann::ordered_json to_json() const;
  static SearchSpace from_json(const nlohmann::ordered_json& j);
};

// Default grids per family.
SearchSpace default_space(models::Family family);

struct CvOptions {
  int k = 3;
  SplitMode mode = SplitMode::chronological;
  std::uint64_t seed = 0;  // fold shuffling (random mode) and model seeds
};

struct CvCell {
  std::size_t index = 0;
  nlohmann::ordered_json params;
  std::vector<double> fold_rmse;
  double mean_rmse = 0.0;
  bool ok = false;
  std::string error;
};

struct SearchResult {
  nlohmann::ordered_json best;
  double best_score = 0.0;
  std::size_t best_index = 0;
  std::vector<CvCell> table;
};

// Trains on the first frame/target pair and returns predictions for the
// second frame. Used to evaluate a cell on one fold pair.
using CellEvaluator = std::function<Eigen::VectorXd(const nlohmann::ordered_json& params,
                                                    const features::FeatureFrame& train, const Eigen::VectorXd& y,
                                                    const features::FeatureFrame& validate)>;

CellEvaluator model_evaluator(models::Family family, std::uint64_t seed);

// Scores every cell by mean validation RMSE over the fold pairs. Failing
// cells are kept in the table with their error and excluded from selection;
// the lowest score wins, ties going to the earliest cell. Throws SearchError
// when every cell fails and ArgumentError on an empty cell list.
SearchResult evaluate_cells(const std::vector<nlohmann::ordered_json>& cells, const CellEvaluator& evaluator,
                            const features::FeatureFrame& X, const Eigen::VectorXd& y, const CvOptions& cv);

SearchResult grid_search(models::Family family, const SearchSpace& space, const features::FeatureFrame& X,
                         const Eigen::VectorXd& y, const CvOptions& cv = {});
SearchResult random_search(models::Family family, const SearchSpace& space, int budget, std::uint64_t seed,
                           const features::FeatureFrame& X, const Eigen::VectorXd& y, const CvOptions& cv = {});

// Per-cell CV results as CSV: cell, params, fold_1..fold_k, mean_rmse, status, error.
std::string cv_table_csv(const SearchResult& result);

}  // namespace parkcast::evaltune
