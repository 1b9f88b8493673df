#pragma once

#include <Eigen/Dense>
#include <span>

namespace parkcast::evaltune {

// All three throw ArgumentError on empty input or unequal lengths.
double mae(std::span<const double> y, std::span<const double> yhat);
double rmse(std::span<const double> y, std::span<const double> yhat);
// 1 - SS_res / SS_tot. Throws UndefinedError when y is constant.
double r2(std::span<const double> y, std::span<const double> yhat);

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// err * scale, e.g. a fractional availability error expressed in vehicles.
// Throws ArgumentError unless scale > 0.
double denormalize_error(double err, double scale);

}  // namespace parkcast::evaltune
