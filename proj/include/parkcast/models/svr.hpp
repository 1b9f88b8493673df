#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <string>
#include <vector>

namespace parkcast::models {

enum class KernelType { linear, rbf };

std::string to_string(KernelType k);
KernelType parse_kernel(const std::string& s);

struct Kernel {
  KernelType type = KernelType::rbf;
  double gamma = 0.0;  // rbf only; <= 0 means 1 / (p * var(X)) at fit time
};

double kernel_value(const Kernel& k, const Eigen::Ref<const Eigen::RowVectorXd>& a,
                    const Eigen::Ref<const Eigen::RowVectorXd>& b);
Eigen::MatrixXd kernel_matrix(const Kernel& k, const Eigen::MatrixXd& X);

// gamma = 1 / (p * var(X)) over all entries; 1 when X is constant.
double scale_gamma(const Eigen::MatrixXd& X);

struct SvrOptions {
  double tolerance = 1e-3;  // KKT violation bound for stopping
  long max_sweeps = 10000;  // iterations are capped at max_sweeps * 2n
};

struct SvrParams {
  Kernel kernel;  // gamma resolved
  double C = 1.0;
  double epsilon = 0.1;
  std::vector<std::size_t> support_indices;
  Eigen::MatrixXd support_vectors;  // one row per support
  Eigen::VectorXd dual_coef;        // alpha_i - alpha_i* per support
  double bias = 0.0;
  double dual_objective = 0.0;
  double max_violation = 0.0;
  long iterations = 0;
};

// The full dual solution, before compaction into supports. `alpha` has 2n
// entries: alpha_i for i < n and alpha_i* at n + i.
struct SvrDual {
  Eigen::VectorXd alpha;
  double bias = 0.0;
  double objective = 0.0;
  double max_violation = 0.0;
  long iterations = 0;
};

// Solves  min 1/2 (a - a*)^T K (a - a*) + eps sum(a + a*) - y^T (a - a*)
//         s.t. sum(a - a*) = 0, 0 <= a, a* <= C
// by SMO with second-order working-set selection.
// Throws ArgumentError on bad inputs, ConvergenceError carrying the largest
// KKT violation when the iteration cap is hit.
SvrDual solve_svr_dual(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double C, double epsilon,
                       const SvrOptions& options = {});

SvrParams fit_svr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double C, double epsilon,
                  Kernel kernel = {}, const SvrOptions& options = {});

Eigen::VectorXd predict_svr(const SvrParams& params, const Eigen::MatrixXd& X);

}  // namespace parkcast::models
