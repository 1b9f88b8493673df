#include "parkcast/models/svr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "parkcast/common/error.hpp"

namespace parkcast::models {

std::string to_string(KernelType k) { return k == KernelType::linear ? "linear" : "rbf"; }

KernelType parse_kernel(const std::string& s) {
  if (s == "linear") return KernelType::linear;
  if (s == "rbf") return KernelType::rbf;
  throw ArgumentError("unknown kernel '" + s + "' (expected linear or rbf)");
}

double kernel_value(const Kernel& k, const Eigen::Ref<const Eigen::RowVectorXd>& a,
                    const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  if (k.type == KernelType::linear) return a.dot(b);
  return std::exp(-k.gamma * (a - b).squaredNorm());
}

Eigen::MatrixXd kernel_matrix(const Kernel& k, const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K(n, n);
  if (k.type == KernelType::linear) {
    K.noalias() = X * X.transpose();
    return K;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d2 = (X.row(i) - X.row(j)).squaredNorm();
      K(i, j) = K(j, i) = std::exp(-k.gamma * d2);
    }
  }
  return K;
}

double scale_gamma(const Eigen::MatrixXd& X) {
  const double count = static_cast<double>(X.size());
  if (count == 0) return 1.0;
  const double mean = X.sum() / count;
  const double var = (X.array() - mean).square().sum() / count;
  if (!(var > 0.0)) return 1.0;
  return 1.0 / (static_cast<double>(X.cols()) * var);
}

namespace {

constexpr double kTau = 1e-12;

}  // namespace

SvrDual solve_svr_dual(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double C, double epsilon,
                       const SvrOptions& options) {
  const Eigen::Index n = y.size();
  if (K.rows() != n || K.cols() != n) throw ArgumentError("solve_svr_dual: kernel matrix shape mismatch");
  if (!(C > 0.0) || !std::isfinite(C)) throw ArgumentError("fit_svr: C must be > 0");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ArgumentError("fit_svr: epsilon must be >= 0");
  if (n < 1) throw ArgumentError("fit_svr: no training rows");
  if (!(options.tolerance > 0.0)) throw ArgumentError("fit_svr: tolerance must be > 0");

  const Eigen::Index l = 2 * n;
  auto idx = [n](Eigen::Index t) { return t < n ? t : t - n; };
  auto sign = [n](Eigen::Index t) { return t < n ? 1.0 : -1.0; };
  auto Q = [&](Eigen::Index s, Eigen::Index t) { return sign(s) * sign(t) * K(idx(s), idx(t)); };

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(l);
  Eigen::VectorXd p(l);
  for (Eigen::Index i = 0; i < n; ++i) {
    p[i] = epsilon - y[i];
    p[i + n] = epsilon + y[i];
  }
  Eigen::VectorXd G = p;
  Eigen::VectorXd QD(l);
  for (Eigen::Index t = 0; t < l; ++t) QD[t] = K(idx(t), idx(t));

  auto upper = [&](Eigen::Index t) { return alpha[t] >= C; };
  auto lower = [&](Eigen::Index t) { return alpha[t] <= 0.0; };

  const long max_iter = std::max<long>(1, options.max_sweeps) * static_cast<long>(l);
  long iter = 0;
  double violation = 0.0;
  for (;;) {
    double g_max = -std::numeric_limits<double>::infinity();
    double g_max2 = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < l; ++t) {
      if (sign(t) > 0) {
        if (!upper(t) && -G[t] >= g_max) { g_max = -G[t]; i = t; }
      } else {
        if (!lower(t) && G[t] >= g_max) { g_max = G[t]; i = t; }
      }
    }
    Eigen::Index j = -1;
    double obj_min = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < l; ++t) {
      if (sign(t) > 0) {
        if (lower(t)) continue;
        g_max2 = std::max(g_max2, G[t]);
        const double grad_diff = g_max + G[t];
        if (i >= 0 && grad_diff > 0) {
          double quad = QD[i] + QD[t] - 2.0 * sign(i) * Q(i, t);
          const double obj = -(grad_diff * grad_diff) / (quad > 0 ? quad : kTau);
          if (obj <= obj_min) { obj_min = obj; j = t; }
        }
      } else {
        if (upper(t)) continue;
        g_max2 = std::max(g_max2, -G[t]);
        const double grad_diff = g_max - G[t];
        if (i >= 0 && grad_diff > 0) {
          double quad = QD[i] + QD[t] + 2.0 * sign(i) * Q(i, t);
          const double obj = -(grad_diff * grad_diff) / (quad > 0 ? quad : kTau);
          if (obj <= obj_min) { obj_min = obj; j = t; }
        }
      }
    }
    violation = std::max(0.0, g_max + g_max2);
    if (i < 0 || j < 0 || g_max + g_max2 < options.tolerance) break;
    if (iter >= max_iter) {
      throw ConvergenceError("fit_svr: SMO did not converge within " + std::to_string(options.max_sweeps) + " sweeps",
                             violation);
    }
    ++iter;

    const double old_i = alpha[i];
    const double old_j = alpha[j];
    const double qij = Q(i, j);
    if (sign(i) != sign(j)) {
      double quad = QD[i] + QD[j] + 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = diff; }
      } else {
        if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = -diff; }
      }
      if (diff > 0) {
        if (alpha[i] > C) { alpha[i] = C; alpha[j] = C - diff; }
      } else {
        if (alpha[j] > C) { alpha[j] = C; alpha[i] = C + diff; }
      }
    } else {
      double quad = QD[i] + QD[j] - 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) { alpha[i] = C; alpha[j] = sum - C; }
      } else {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = sum; }
      }
      if (sum > C) {
        if (alpha[j] > C) { alpha[j] = C; alpha[i] = sum - C; }
      } else {
        if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = sum; }
      }
    }
    const double d_i = alpha[i] - old_i;
    const double d_j = alpha[j] - old_j;
    if (d_i != 0.0 || d_j != 0.0) {
      for (Eigen::Index t = 0; t < l; ++t) G[t] += Q(i, t) * d_i + Q(j, t) * d_j;
    }
  }

  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  long n_free = 0;
  for (Eigen::Index t = 0; t < l; ++t) {
    const double yg = sign(t) * G[t];
    if (upper(t)) {
      if (sign(t) < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (sign(t) > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);

  SvrDual out;
  out.alpha = alpha;
  out.bias = -rho;
  out.objective = 0.5 * alpha.dot(G + p);
  out.max_violation = violation;
  out.iterations = iter;
  return out;
}

SvrParams fit_svr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double C, double epsilon, Kernel kernel,
                  const SvrOptions& options) {
  if (X.rows() != y.size()) throw ArgumentError("fit_svr: X and y row counts differ");
  if (!X.allFinite() || !y.allFinite()) throw ArgumentError("fit_svr: non-finite input");
  if (kernel.type == KernelType::rbf && !(kernel.gamma > 0.0)) kernel.gamma = scale_gamma(X);
  const Eigen::MatrixXd K = kernel_matrix(kernel, X);
  const SvrDual dual = solve_svr_dual(K, y, C, epsilon, options);

  const Eigen::Index n = y.size();
  SvrParams out;
  out.kernel = kernel;
  out.C = C;
  out.epsilon = epsilon;
  out.bias = dual.bias;
  out.dual_objective = dual.objective;
  out.max_violation = dual.max_violation;
  out.iterations = dual.iterations;
  std::vector<double> coef;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double c = dual.alpha[i] - dual.alpha[i + n];
    if (c != 0.0) {
      out.support_indices.push_back(static_cast<std::size_t>(i));
      coef.push_back(c);
    }
  }
  const auto s = static_cast<Eigen::Index>(coef.size());
  out.dual_coef = Eigen::Map<const Eigen::VectorXd>(coef.data(), s);
  out.support_vectors.resize(s, X.cols());
  for (Eigen::Index k = 0; k < s; ++k) out.support_vectors.row(k) = X.row(static_cast<Eigen::Index>(out.support_indices[k]));
  return out;
}

Eigen::VectorXd predict_svr(const SvrParams& params, const Eigen::MatrixXd& X) {
  if (params.support_vectors.rows() > 0 && X.cols() != params.support_vectors.cols()) {
    throw ArgumentError("predict_svr: column count differs from the support vectors");
  }
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    double f = params.bias;
    for (Eigen::Index k = 0; k < params.support_vectors.rows(); ++k) {
      f += params.dual_coef[k] * kernel_value(params.kernel, params.support_vectors.row(k), X.row(r));
    }
    out[r] = f;
  }
  return out;
}

}  // namespace parkcast::models
