#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>

#include "oracles/oracles.hpp"

namespace fixture {

// Many weak, noisy features: ridge beats least squares and heavy shrinkage
// underfits, so the CV optimum sits inside a log-spaced grid.
struct Planted {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

inline Planted planted_ridge(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 1);
  const int n = 60, p = 15;
  Planted d{Eigen::MatrixXd(n, p), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    double s = 0;
    for (int j = 0; j < p; ++j) {
      d.X(i, j) = g(rng);
      s += 0.3 * d.X(i, j);
    }
    d.y(i) = s + 1.5 * g(rng);
  }
  return d;
}

// Forward-chaining 3-fold CV RMSE of ridge on contiguous thirds, by hand.
inline double ridge_cv_rmse(const Planted& d, double lambda) {
  const int n = static_cast<int>(d.X.rows());
  const int fold = n / 3;
  double total = 0;
  for (int v = 1; v < 3; ++v) {
    oracle::Mat X;
    std::vector<double> y;
    for (int i = 0; i < v * fold; ++i) {
      X.emplace_back();
      for (int j = 0; j < d.X.cols(); ++j) X.back().push_back(d.X(i, j));
      y.push_back(d.y(i));
    }
    const auto w = oracle::ridge(X, y, lambda);
    std::vector<double> truth, pred;
    for (int i = v * fold; i < (v + 1) * fold; ++i) {
      double f = w.back();
      for (int j = 0; j < d.X.cols(); ++j) f += w[static_cast<std::size_t>(j)] * d.X(i, j);
      truth.push_back(d.y(i));
      pred.push_back(f);
    }
    total += oracle::rmse(truth, pred);
  }
  return total / 2;
}

}  // namespace fixture
