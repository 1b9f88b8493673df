#pragma once

#include <span>
#include <string>
#include <vector>

namespace parkcast::features {

// Pearson product-moment correlation, computed in one pass with running
// co-moments. Throws ArgumentError when |x| != |y| or n < 3 and
// UndefinedError when either sequence is constant.
double pearson(std::span<const double> x, std::span<const double> y);

// 1-based ranks; tied values share the average of the ranks they span.
std::vector<double> average_ranks(std::span<const double> values);

struct SpearmanResult {
  double rho = 0.0;
  double p_value = 1.0;  // two-sided
};

// Pearson correlation of average ranks, which equals 1 - 6*sum(d^2)/(n(n^2-1))
// when there are no ties.
SpearmanResult spearman(std::span<const double> x, std::span<const double> y);

// Two-sided p-value of a correlation coefficient under the t approximation:
// t = rho * sqrt((n-2)/(1-rho^2)) with n-2 degrees of freedom, evaluated as
// I_{df/(df+t^2)}(df/2, 1/2). |rho| = 1 yields the smallest normal double
// rather than 0 so the result stays in (0, 1].
double correlation_p_value(double rho, std::size_t n);

struct CorrelationReport {
  double r = 0.0;
  double rho = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  std::string x_name;
  std::string y_name;
};

CorrelationReport correlate(std::span<const double> x, std::span<const double> y, std::string x_name,
                            std::string y_name);

}  // namespace parkcast::features
