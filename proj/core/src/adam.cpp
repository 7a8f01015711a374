#include "spu/adam.hpp"

#include <cmath>

namespace spu::nn {

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state,
               double lr_multiplier) {
  if (grad.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: dimension mismatch");
  }
  if (!grad.allFinite()) throw NonFiniteGradient("adam_step: gradient is not finite");

  ++state.step;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseAbs2();
  const double t = static_cast<double>(state.step);
  const double m_scale = 1.0 / (1.0 - std::pow(state.beta1, t));
  const double v_scale = 1.0 / (1.0 - std::pow(state.beta2, t));
  const double step = state.alpha * lr_multiplier;
  params.array() -=
      step * (m_scale * state.m.array()) / ((v_scale * state.v.array()).sqrt() + state.eps);
}

}  // namespace spu::nn
