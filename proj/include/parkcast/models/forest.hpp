#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace parkcast::models {

// Internal nodes send x[feature] < threshold to `left`. Leaves have
// feature == -1 and carry the mean target of their training rows.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  int n_samples = 0;

  bool leaf() const noexcept { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  int depth() const;
  bool operator==(const RegressionTree&) const = default;
};

struct ForestOptions {
  int n_trees = 100;
  int max_depth = 0;         // 0 = unlimited
  int min_samples_leaf = 1;
  int max_features = 0;      // 0 = ceil(p / 3)
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

struct ForestParams {
  std::vector<RegressionTree> trees;
  ForestOptions options;
  int n_features = 0;

  bool operator==(const ForestParams& o) const { return trees == o.trees && n_features == o.n_features; }
};

// Seed of tree `index` derived from the forest seed (splitmix64).
std::uint64_t tree_seed(std::uint64_t forest_seed, std::size_t index);

// Grows one CART tree on the given row sample (duplicates allowed).
RegressionTree grow_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<std::size_t> sample,
                         const ForestOptions& options, std::uint64_t seed);

// Throws ArgumentError when n_trees < 1, min_samples_leaf < 1, max_depth < 0
// or rows < 2 * min_samples_leaf.
ForestParams fit_rfr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestOptions& options = {});

// Mean of the tree outputs. Outputs are summed in sorted order so the result
// does not depend on tree order.
double predict_forest_row(const ForestParams& forest, const Eigen::Ref<const Eigen::RowVectorXd>& x);
Eigen::VectorXd predict_forest(const ForestParams& forest, const Eigen::MatrixXd& X);

}  // namespace parkcast::models
