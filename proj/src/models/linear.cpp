#include "parkcast/models/linear.hpp"

#include <cmath>
#include <string>

#include "parkcast/common/error.hpp"

namespace parkcast::models {

std::string to_string(Penalty p) {
  switch (p) {
    case Penalty::none: return "none";
    case Penalty::l1: return "l1";
    case Penalty::l2: return "l2";
  }
  return "none";
}

Penalty parse_penalty(const std::string& s) {
  if (s == "none") return Penalty::none;
  if (s == "l1" || s == "L1" || s == "lasso") return Penalty::l1;
  if (s == "l2" || s == "L2" || s == "ridge") return Penalty::l2;
  throw ArgumentError("unknown penalty '" + s + "' (expected none, l1 or l2)");
}

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

// Duality gap of (1/2n)||r||^2 + lambda||w||_1 with residual r = yc - Xc w.
double lasso_gap(const Eigen::MatrixXd& Xc, const Eigen::VectorXd& yc, const Eigen::VectorXd& w,
                 const Eigen::VectorXd& r, double lambda) {
  const double n = static_cast<double>(Xc.rows());
  const double alpha = lambda * n;
  const Eigen::VectorXd xtr = Xc.transpose() * r;
  const double dual_norm = xtr.cwiseAbs().maxCoeff();
  const double r_norm2 = r.squaredNorm();
  const double w_l1 = w.cwiseAbs().sum();
  const double scale = dual_norm > alpha ? alpha / dual_norm : 1.0;
  const double gap = 0.5 * r_norm2 * (1.0 + scale * scale) + alpha * w_l1 - scale * r.dot(yc);
  return gap / n;
}

}  // namespace

LinearParams fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Regularization reg,
                        const LinearOptions& options) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (n != y.size()) throw ArgumentError("fit_linear: X has " + std::to_string(n) + " rows, y has " + std::to_string(y.size()));
  if (n < 2) throw ArgumentError("fit_linear: need at least 2 rows");
  if (!(reg.lambda >= 0.0) || !std::isfinite(reg.lambda)) throw ArgumentError("fit_linear: lambda must be finite and >= 0");
  if (!X.allFinite() || !y.allFinite()) throw ArgumentError("fit_linear: non-finite input");
  if (reg.penalty == Penalty::none) reg.lambda = 0.0;

  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;

  LinearParams out;
  out.regularization = reg;

  if (reg.penalty == Penalty::l1 && reg.lambda > 0.0) {
    const double dn = static_cast<double>(n);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd r = yc;
    const Eigen::VectorXd col_sq = Xc.colwise().squaredNorm().transpose();
    const double threshold = reg.lambda * dn;
    double gap = lasso_gap(Xc, yc, w, r, reg.lambda);
    int sweep = 0;
    while (gap > options.l1_gap_tolerance) {
      if (sweep >= options.l1_max_sweeps) {
        throw ConvergenceError("fit_linear: L1 coordinate descent did not reach the duality-gap tolerance", gap);
      }
      for (Eigen::Index j = 0; j < p; ++j) {
        if (col_sq[j] == 0.0) continue;
        const double old = w[j];
        const double rho = Xc.col(j).dot(r) + col_sq[j] * old;
        const double updated = soft_threshold(rho, threshold) / col_sq[j];
        if (updated != old) {
          r.noalias() -= (updated - old) * Xc.col(j);
          w[j] = updated;
        }
      }
      ++sweep;
      gap = lasso_gap(Xc, yc, w, r, reg.lambda);
    }
    out.weights = w;
    out.sweeps = sweep;
    out.duality_gap = gap;
  } else {
    Eigen::MatrixXd gram = Xc.transpose() * Xc;
    const Eigen::VectorXd rhs = Xc.transpose() * yc;
    if (reg.lambda == 0.0) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xc);
      if (qr.rank() < p) {
        throw RankError("fit_linear: design matrix has rank " + std::to_string(qr.rank()) + " < " +
                        std::to_string(p) + " columns and lambda = 0");
      }
      out.weights = qr.solve(yc);
    } else {
      gram.diagonal().array() += reg.lambda;
      out.weights = gram.ldlt().solve(rhs);
    }
  }
  out.bias = y_mean - x_mean.dot(out.weights);
  if (!out.weights.allFinite() || !std::isfinite(out.bias)) {
    throw RankError("fit_linear: solution is not finite");
  }
  return out;
}

Eigen::VectorXd predict_linear(const LinearParams& params, const Eigen::MatrixXd& X) {
  if (X.cols() != params.weights.size()) {
    throw ArgumentError("predict_linear: expected " + std::to_string(params.weights.size()) + " columns, got " +
                        std::to_string(X.cols()));
  }
  Eigen::VectorXd out = X * params.weights;
  out.array() += params.bias;
  return out;
}

}  // namespace parkcast::models
