#pragma once

#include <Eigen/Dense>

#include <stdexcept>

namespace spu::nn {

/// Thrown when a gradient handed to the optimizer contains NaN or infinity.
class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamState {
  long step = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  double alpha = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  AdamState(Eigen::Index dim, double step_size)
      : m(Eigen::VectorXd::Zero(dim)), v(Eigen::VectorXd::Zero(dim)), alpha(step_size) {}
};

/// One bias-corrected Adam descent step; the effective step size is alpha * lr_multiplier.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state,
               double lr_multiplier = 1.0);

}  // namespace spu::nn
