#include "parkcast/features/correlation.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <limits>
#include <numeric>

#include "parkcast/common/error.hpp"

namespace parkcast::features {

namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw ArgumentError("correlation inputs differ in length: " + std::to_string(x.size()) + " vs " +
                        std::to_string(y.size()));
  }
  if (x.size() < 3) throw ArgumentError("correlation needs at least 3 samples");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw ArgumentError("correlation inputs must be finite");
  }
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  double mx = 0.0, my = 0.0, cxy = 0.0, m2x = 0.0, m2y = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double n = static_cast<double>(i + 1);
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    mx += dx / n;
    my += dy / n;
    cxy += dx * (y[i] - my);
    m2x += dx * (x[i] - mx);
    m2y += dy * (y[i] - my);
  }
  if (m2x <= 0.0 || m2y <= 0.0) throw UndefinedError("correlation undefined for a constant sequence");
  return std::clamp(cxy / std::sqrt(m2x * m2y), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

double correlation_p_value(double rho, std::size_t n) {
  if (n < 3) throw ArgumentError("p-value needs at least 3 samples");
  if (!std::isfinite(rho) || std::abs(rho) > 1.0) throw ArgumentError("correlation must lie in [-1, 1]");
  const double df = static_cast<double>(n - 2);
  // df / (df + t^2) simplifies to 1 - rho^2; the factored form keeps precision near |rho| = 1.
  const double x = (1.0 - rho) * (1.0 + rho);
  if (x <= 0.0) return std::numeric_limits<double>::min();
  const double p = boost::math::ibeta(df / 2.0, 0.5, x);
  return std::clamp(p, std::numeric_limits<double>::min(), 1.0);
}

SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  SpearmanResult out;
  out.rho = pearson(rx, ry);
  out.p_value = correlation_p_value(out.rho, x.size());
  return out;
}

CorrelationReport correlate(std::span<const double> x, std::span<const double> y, std::string x_name,
                            std::string y_name) {
  CorrelationReport rep;
  rep.r = pearson(x, y);
  const auto s = spearman(x, y);
  rep.rho = s.rho;
  rep.p_value = s.p_value;
  rep.n = x.size();
  rep.x_name = std::move(x_name);
  rep.y_name = std::move(y_name);
  return rep;
}

}  // namespace parkcast::features
