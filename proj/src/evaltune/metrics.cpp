#include "parkcast/evaltune/metrics.hpp"

#include <cmath>
#include <string>

#include "parkcast/common/error.hpp"

namespace parkcast::evaltune {

namespace {

void check(std::span<const double> y, std::span<const double> yhat, const char* name) {
  if (y.empty()) throw ArgumentError(std::string(name) + ": empty input");
  if (y.size() != yhat.size()) {
    throw ArgumentError(std::string(name) + ": lengths differ (" + std::to_string(y.size()) + " vs " +
                        std::to_string(yhat.size()) + ")");
  }
}

}  // namespace

double mae(std::span<const double> y, std::span<const double> yhat) {
  check(y, yhat, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - yhat[i]);
  return s / static_cast<double>(y.size());
}

double rmse(std::span<const double> y, std::span<const double> yhat) {
  check(y, yhat, "rmse");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - yhat[i];
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(y.size()));
}

double r2(std::span<const double> y, std::span<const double> yhat) {
  check(y, yhat, "r2");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  if (ss_tot == 0.0) throw UndefinedError("r2: target is constant");
  return 1.0 - ss_res / ss_tot;
}

double denormalize_error(double err, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ArgumentError("denormalize_error: scale must be > 0");
  return err * scale;
}

}  // namespace parkcast::evaltune
