#include "parkcast/models/adam.hpp"

#include <cmath>

#include "parkcast/common/error.hpp"

namespace parkcast::models {

void adam_update(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grads,
                 AdamState& state) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ArgumentError("adam_update: parameter, gradient and moment sizes differ");
  }
  const AdamConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (Eigen::Index k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    state.m[k] = c.beta1 * state.m[k] + (1.0 - c.beta1) * g;
    state.v[k] = c.beta2 * state.v[k] + (1.0 - c.beta2) * g * g;
    const double m_hat = state.m[k] / correction1;
    const double v_hat = state.v[k] / correction2;
    params[k] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace parkcast::models
