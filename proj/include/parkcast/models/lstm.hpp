#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "parkcast/models/adam.hpp"

namespace parkcast::models {

// One input sequence: `lookback` rows (oldest first) by input width.
using Sequence = Eigen::MatrixXd;

// Parameters live in one flat vector so the optimiser sees a single array.
// Layout: W (4H x p), U (4H x H), b (4H), w_out (H), b_out (1), matrices
// column-major. Gate blocks are stacked input, forget, cell, output.
struct LstmParams {
  int input_size = 0;
  int units = 0;
  int lookback = 0;
  Eigen::VectorXd theta;

  static Eigen::Index size_for(int input_size, int units);

  Eigen::Map<const Eigen::MatrixXd> W() const;
  Eigen::Map<const Eigen::MatrixXd> U() const;
  Eigen::Map<const Eigen::VectorXd> b() const;
  Eigen::Map<const Eigen::VectorXd> w_out() const;
  double b_out() const;

  bool operator==(const LstmParams& o) const {
    return input_size == o.input_size && units == o.units && lookback == o.lookback && theta == o.theta;
  }
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) with fan_in = p + H for the gates
// and H for the dense head.
LstmParams init_lstm(int input_size, int units, int lookback, std::uint64_t seed);

struct GateTrace {
  std::vector<Eigen::VectorXd> input, forget, candidate, output, cell, hidden;
};

double lstm_forward(const LstmParams& params, const Sequence& seq, GateTrace* trace = nullptr);
Eigen::VectorXd predict_lstm(const LstmParams& params, std::span<const Sequence> sequences);

// Mean squared error over the batch and its gradient with respect to theta.
double lstm_loss_and_gradient(const LstmParams& params, std::span<const Sequence> batch,
                              std::span<const double> targets, Eigen::VectorXd& grad);

// Builds one window per row: the last `lookback` rows of the same group up to
// and including the row, left-padded by repeating the group's earliest row.
// An empty `groups` treats all rows as one series.
std::vector<Sequence> make_sequences(const Eigen::MatrixXd& X, std::span<const int> groups, int lookback);

struct LstmOptions {
  int units = 50;
  int epochs = 50;
  int batch_size = 72;
  int lookback = 3;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

struct LstmHistory {
  std::vector<double> train_mse;
  std::vector<double> test_mse;
};

struct LstmFit {
  LstmParams params;
  LstmHistory history;
};

// Trains with Adam on seeded per-epoch shuffles. Batches are
// min(batch_size, remaining) so a trailing partial batch is still trained.
// Throws ArgumentError on bad shapes or options and DivergenceError when the
// loss turns non-finite.
LstmFit fit_lstm(std::span<const Sequence> sequences, std::span<const double> targets, const LstmOptions& options,
                 std::span<const Sequence> test_sequences = {}, std::span<const double> test_targets = {});

}  // namespace parkcast::models
