#include "parkcast/evaltune/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "parkcast/common/error.hpp"

namespace parkcast::evaltune {

std::string to_string(SplitMode m) { return m == SplitMode::chronological ? "chronological" : "random"; }

SplitMode parse_split_mode(const std::string& s) {
  if (s == "chronological") return SplitMode::chronological;
  if (s == "random" || s == "seeded-random") return SplitMode::random;
  throw ArgumentError("unknown split mode '" + s + "' (expected chronological or random)");
}

namespace {

void seeded_shuffle(std::vector<std::size_t>& v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t k = v.size(); k > 1; --k) {
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    std::swap(v[k - 1], v[pick(rng)]);
  }
}

}  // namespace

SplitPlan train_test_split(std::size_t n, double ratio, SplitMode mode, std::uint64_t seed) {
  if (n < 10) throw ArgumentError("train_test_split: need at least 10 rows, got " + std::to_string(n));
  if (!(ratio > 0.0 && ratio < 1.0)) throw ArgumentError("train_test_split: ratio must be in (0, 1)");
  SplitPlan plan;
  plan.mode = mode;
  plan.train_ratio = ratio;
  plan.seed = seed;
  const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (mode == SplitMode::random) seeded_shuffle(order, seed);
  plan.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  plan.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(plan.train.begin(), plan.train.end());
  std::sort(plan.test.begin(), plan.test.end());
  return plan;
}

std::vector<std::vector<std::size_t>> kfold(std::span<const std::size_t> indices, int k, SplitMode mode,
                                            std::uint64_t seed) {
  if (k < 2) throw ArgumentError("kfold: k must be >= 2");
  const std::size_t n = indices.size();
  const auto uk = static_cast<std::size_t>(k);
  if (n < uk) throw ArgumentError("kfold: " + std::to_string(n) + " indices cannot fill " + std::to_string(k) + " folds");
  std::vector<std::size_t> order(indices.begin(), indices.end());
  if (mode == SplitMode::random) seeded_shuffle(order, seed);
  std::vector<std::vector<std::size_t>> folds(uk);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < uk; ++i) {
    const std::size_t size = n / uk + (i < n % uk ? 1 : 0);
    folds[i].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                    order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    if (mode == SplitMode::random) std::sort(folds[i].begin(), folds[i].end());
    pos += size;
  }
  return folds;
}

std::vector<FoldPair> fold_pairs(const std::vector<std::vector<std::size_t>>& folds, SplitMode mode) {
  std::vector<FoldPair> pairs;
  if (mode == SplitMode::chronological) {
    for (std::size_t j = 1; j < folds.size(); ++j) {
      FoldPair p;
      for (std::size_t i = 0; i < j; ++i) p.train.insert(p.train.end(), folds[i].begin(), folds[i].end());
      p.validate = folds[j];
      pairs.push_back(std::move(p));
    }
  } else {
    for (std::size_t j = 0; j < folds.size(); ++j) {
      FoldPair p;
      for (std::size_t i = 0; i < folds.size(); ++i) {
        if (i != j) p.train.insert(p.train.end(), folds[i].begin(), folds[i].end());
      }
      std::sort(p.train.begin(), p.train.end());
      p.validate = folds[j];
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

}  // namespace parkcast::evaltune
