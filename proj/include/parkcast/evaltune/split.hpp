#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace parkcast::evaltune {

enum class SplitMode { chronological, random };

std::string to_string(SplitMode m);
SplitMode parse_split_mode(const std::string& s);

struct SplitPlan {
  SplitMode mode = SplitMode::chronological;
  double train_ratio = 0.7;
  std::uint64_t seed = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Train size is floor(ratio * n). Rows are assumed to be in time order, so
// chronological mode puts the earliest rows in train. Random mode shuffles
// with `seed`; both partitions are returned sorted.
// Throws ArgumentError when n < 10 or ratio is outside (0, 1).
SplitPlan train_test_split(std::size_t n, double ratio = 0.7, SplitMode mode = SplitMode::chronological,
                           std::uint64_t seed = 0);

// k folds whose sizes differ by at most one (larger folds first).
// Chronological folds are contiguous runs of `indices` in the given order;
// random folds are drawn from a seeded shuffle. Throws ArgumentError when
// k < 2 or there are fewer indices than folds.
std::vector<std::vector<std::size_t>> kfold(std::span<const std::size_t> indices, int k = 3,
                                            SplitMode mode = SplitMode::chronological, std::uint64_t seed = 0);

struct FoldPair {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validate;
};

// Chronological: forward chaining, fold j is validated on a model trained on
// folds 0..j-1 (k-1 pairs). Random: each fold validated against the rest.
std::vector<FoldPair> fold_pairs(const std::vector<std::vector<std::size_t>>& folds, SplitMode mode);

}  // namespace parkcast::evaltune
