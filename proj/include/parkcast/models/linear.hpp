#pragma once

#include <Eigen/Dense>
#include <string>

namespace parkcast::models {

enum class Penalty { none, l1, l2 };

std::string to_string(Penalty p);
Penalty parse_penalty(const std::string& s);

struct Regularization {
  Penalty penalty = Penalty::none;
  double lambda = 0.0;
};

struct LinearParams {
  Eigen::VectorXd weights;
  double bias = 0.0;
  Regularization regularization;
  int sweeps = 0;              // coordinate-descent sweeps (L1 only)
  double duality_gap = 0.0;    // final gap (L1 only)
};

struct LinearOptions {
  double l1_gap_tolerance = 1e-8;
  int l1_max_sweeps = 100000;
};

// Least squares with an unpenalised bias.
//   none / L2:  (Xc^T Xc + lambda I) w = Xc^T yc on centred data.
//   L1:         min (1/2n)||y - Xw - b||^2 + lambda ||w||_1 by cyclic
//               coordinate descent until the duality gap (same 1/n scaling)
//               is at most l1_gap_tolerance.
// Throws ArgumentError (fewer than 2 rows, shape mismatch, negative lambda),
// RankError (singular system with lambda = 0), ConvergenceError (L1 sweeps
// exhausted).
LinearParams fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Regularization reg,
                        const LinearOptions& options = {});

Eigen::VectorXd predict_linear(const LinearParams& params, const Eigen::MatrixXd& X);

}  // namespace parkcast::models
