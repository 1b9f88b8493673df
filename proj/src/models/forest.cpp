#include "parkcast/models/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "parkcast/common/error.hpp"

namespace parkcast::models {

double RegressionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  if (nodes.empty()) throw ArgumentError("RegressionTree::predict: empty tree");
  std::size_t k = 0;
  while (!nodes[k].leaf()) {
    const TreeNode& n = nodes[k];
    k = static_cast<std::size_t>(x[n.feature] < n.threshold ? n.left : n.right);
  }
  return nodes[k].value;
}

int RegressionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    best = std::max(best, d[k]);
    if (!nodes[k].leaf()) {
      d[static_cast<std::size_t>(nodes[k].left)] = d[k] + 1;
      d[static_cast<std::size_t>(nodes[k].right)] = d[k] + 1;
    }
  }
  return best;
}

std::uint64_t tree_seed(std::uint64_t forest_seed, std::size_t index) {
  std::uint64_t z = forest_seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  std::size_t left_count = 0;
  double score = -std::numeric_limits<double>::infinity();
};

class TreeBuilder {
public:
  TreeBuilder(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestOptions& opt, std::uint64_t seed)
      : X_(X), y_(y), opt_(opt), rng_(seed) {
    const int p = static_cast<int>(X.cols());
    max_features_ = opt.max_features > 0 ? std::min(opt.max_features, p) : std::max(1, (p + 2) / 3);
    features_.resize(static_cast<std::size_t>(p));
    std::iota(features_.begin(), features_.end(), 0);
  }

  int build(std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    TreeNode node;
    node.n_samples = static_cast<int>(rows.size());

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (std::size_t r : rows) {
      const double v = y_[static_cast<Eigen::Index>(r)];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
    }
    node.value = lo == hi ? lo : sum / static_cast<double>(rows.size());

    const auto min_leaf = static_cast<std::size_t>(opt_.min_samples_leaf);
    const bool depth_reached = opt_.max_depth > 0 && depth >= opt_.max_depth;
    if (lo == hi || depth_reached || rows.size() < 2 * min_leaf) {
      tree_.nodes[static_cast<std::size_t>(id)] = node;
      return id;
    }

    const Split split = find_split(rows);
    if (split.feature < 0) {
      tree_.nodes[static_cast<std::size_t>(id)] = node;
      return id;
    }

    std::vector<std::size_t> left, right;
    left.reserve(split.left_count);
    right.reserve(rows.size() - split.left_count);
    for (std::size_t r : rows) {
      if (X_(static_cast<Eigen::Index>(r), split.feature) < split.threshold) left.push_back(r);
      else right.push_back(r);
    }
    std::vector<std::size_t>().swap(rows);

    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = build(left, depth + 1);
    node.right = build(right, depth + 1);
    tree_.nodes[static_cast<std::size_t>(id)] = node;
    return id;
  }

  RegressionTree take() { return std::move(tree_); }

private:
  // Visits features in a random order and stops once max_features of them
  // admitted at least one valid partition.
  Split find_split(const std::vector<std::size_t>& rows) {
    const std::size_t m = rows.size();
    const auto min_leaf = static_cast<std::size_t>(opt_.min_samples_leaf);
    Split best;
    int usable = 0;
    std::vector<std::size_t> order(rows);
    for (std::size_t k = 0; k < features_.size() && usable < max_features_; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, features_.size() - 1);
      std::swap(features_[k], features_[pick(rng_)]);
      const int f = features_[k];

      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double xa = X_(static_cast<Eigen::Index>(a), f);
        const double xb = X_(static_cast<Eigen::Index>(b), f);
        return xa < xb || (xa == xb && a < b);
      });
      double total = 0.0;
      for (std::size_t r : order) total += y_[static_cast<Eigen::Index>(r)];

      bool any = false;
      double left_sum = 0.0;
      for (std::size_t i = 1; i < m; ++i) {
        left_sum += y_[static_cast<Eigen::Index>(order[i - 1])];
        const double x_lo = X_(static_cast<Eigen::Index>(order[i - 1]), f);
        const double x_hi = X_(static_cast<Eigen::Index>(order[i]), f);
        if (!(x_lo < x_hi)) continue;
        if (i < min_leaf || m - i < min_leaf) continue;
        any = true;
        const double right_sum = total - left_sum;
        const double score = left_sum * left_sum / static_cast<double>(i) +
                             right_sum * right_sum / static_cast<double>(m - i);
        if (score > best.score) {
          double thr = x_lo + 0.5 * (x_hi - x_lo);
          if (!(thr > x_lo) || thr > x_hi) thr = x_hi;
          best.feature = f;
          best.threshold = thr;
          best.left_count = i;
          best.score = score;
        }
      }
      if (any) ++usable;
    }
    return best;
  }

  const Eigen::MatrixXd& X_;
  const Eigen::VectorXd& y_;
  const ForestOptions& opt_;
  std::mt19937_64 rng_;
  int max_features_ = 1;
  std::vector<int> features_;
  RegressionTree tree_;
};

void check_options(const ForestOptions& o, Eigen::Index rows) {
  if (o.n_trees < 1) throw ArgumentError("fit_rfr: n_trees must be >= 1");
  if (o.min_samples_leaf < 1) throw ArgumentError("fit_rfr: min_samples_leaf must be >= 1");
  if (o.max_depth < 0) throw ArgumentError("fit_rfr: max_depth must be >= 0 (0 = unlimited)");
  if (o.max_features < 0) throw ArgumentError("fit_rfr: max_features must be >= 0");
  if (rows < 2 * static_cast<Eigen::Index>(o.min_samples_leaf)) {
    throw ArgumentError("fit_rfr: need at least 2 * min_samples_leaf = " + std::to_string(2 * o.min_samples_leaf) +
                        " rows, got " + std::to_string(rows));
  }
}

}  // namespace

RegressionTree grow_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<std::size_t> sample,
                         const ForestOptions& options, std::uint64_t seed) {
  if (sample.empty()) throw ArgumentError("grow_tree: empty sample");
  TreeBuilder builder(X, y, options, seed);
  builder.build(sample, 0);
  return builder.take();
}

ForestParams fit_rfr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestOptions& options) {
  if (X.rows() != y.size()) throw ArgumentError("fit_rfr: X and y row counts differ");
  if (X.cols() < 1) throw ArgumentError("fit_rfr: no feature columns");
  if (!X.allFinite() || !y.allFinite()) throw ArgumentError("fit_rfr: non-finite input");
  check_options(options, X.rows());

  ForestParams forest;
  forest.options = options;
  forest.n_features = static_cast<int>(X.cols());
  forest.trees.reserve(static_cast<std::size_t>(options.n_trees));
  const auto n = static_cast<std::size_t>(X.rows());
  for (int t = 0; t < options.n_trees; ++t) {
    const std::uint64_t seed = tree_seed(options.seed, static_cast<std::size_t>(t));
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> sample(n);
    if (options.bootstrap) {
      std::uniform_int_distribution<std::size_t> draw(0, n - 1);
      for (auto& s : sample) s = draw(rng);
    } else {
      std::iota(sample.begin(), sample.end(), std::size_t{0});
    }
    forest.trees.push_back(grow_tree(X, y, std::move(sample), options, rng()));
  }
  return forest;
}

double predict_forest_row(const ForestParams& forest, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  if (forest.trees.empty()) throw ArgumentError("predict_forest: empty forest");
  if (x.size() != forest.n_features) {
    throw ArgumentError("predict_forest: expected " + std::to_string(forest.n_features) + " columns, got " +
                        std::to_string(x.size()));
  }
  std::vector<double> out;
  out.reserve(forest.trees.size());
  for (const auto& t : forest.trees) out.push_back(t.predict(x));
  std::sort(out.begin(), out.end());
  if (out.front() == out.back()) return out.front();
  double sum = 0.0;
  for (double v : out) sum += v;
  return std::clamp(sum / static_cast<double>(out.size()), out.front(), out.back());
}

Eigen::VectorXd predict_forest(const ForestParams& forest, const Eigen::MatrixXd& X) {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) out[r] = predict_forest_row(forest, X.row(r));
  return out;
}

}  // namespace parkcast::models
