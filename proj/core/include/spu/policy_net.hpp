#pragma once

#include "spu/mlp.hpp"

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace spu::nn {

enum class HeadKind { categorical, gaussian };

std::string_view to_string(HeadKind kind);
HeadKind parse_head_kind(std::string_view name);

/// A single action: an index for categorical heads, a vector for Gaussian heads.
struct Action {
  int index = -1;
  Vector value;

  static Action discrete(int a) { return {a, {}}; }
  static Action continuous(Vector v) { return {-1, std::move(v)}; }
};

/// Column-aligned batch of actions matching a batch of states.
struct ActionBatch {
  std::vector<int> indices;  // categorical
  Matrix values;             // gaussian, D x M

  Eigen::Index size() const {
    return indices.empty() ? values.cols() : static_cast<Eigen::Index>(indices.size());
  }
  static ActionBatch single(const Action& action);
};

/// Head parameters for a batch of states plus the trunk activations for backprop.
struct PolicyOutput {
  HeadKind kind = HeadKind::categorical;
  /// Categorical: logits (K x M). Gaussian: means (D x M).
  Matrix head;
  /// Categorical only: log-softmax of head.
  Matrix log_probs;
  /// Gaussian only: state-independent log standard deviations.
  Vector log_std;
  Mlp::Cache cache;

  Eigen::Index batch_size() const { return head.cols(); }
  Matrix probs() const { return log_probs.array().exp().matrix(); }
};

/// Per-sample gradients of a scalar with respect to the head outputs.
struct HeadGrad {
  Matrix d_head;     // same shape as PolicyOutput::head
  Matrix d_log_std;  // D x M, Gaussian only

  /// Multiplies column m by weights(m).
  void scale_columns(const Vector& weights);
  HeadGrad& operator+=(const HeadGrad& other);
};

/// Draws an action for column m of a forward pass.
Action sample_action(const PolicyOutput& out, Eigen::Index m, std::mt19937_64& rng);

/// log pi(a_m | s_m) per column.
Vector log_prob(const PolicyOutput& out, const ActionBatch& actions);
HeadGrad d_log_prob(const PolicyOutput& out, const ActionBatch& actions);

/// KL(p(.|s_m) || q(.|s_m)) per column; closed form for both heads.
Vector kl(const PolicyOutput& p, const PolicyOutput& q);
/// Gradient of kl(p, q) with respect to p's head.
HeadGrad d_kl(const PolicyOutput& p, const PolicyOutput& q);

/**
 * Policy network: a tanh MLP trunk producing categorical logits or Gaussian
 * means, plus a state-independent log-std vector for the Gaussian head.
 * The flat parameter vector is [trunk params, log_std].
 */
class PolicyNet {
 public:
  PolicyNet(HeadKind kind, int state_dim, int action_dim, std::vector<int> hidden = {64, 64});

  HeadKind kind() const { return kind_; }
  int state_dim() const { return trunk_.input_dim(); }
  int action_dim() const { return action_dim_; }
  const Mlp& trunk() const { return trunk_; }

  /// Hidden gain 1.0, output gain 0.01, log_std 0.
  void init(std::mt19937_64& rng);

  Eigen::Index num_params() const { return trunk_.num_params() + log_std_.size(); }
  Vector parameters() const;
  void set_parameters(const Vector& params);
  const Vector& log_std() const { return log_std_; }

  PolicyOutput forward(const Matrix& states) const;
  /// Parameter gradient of sum_m (upstream_m . head_m).
  Vector backward(const PolicyOutput& out, const HeadGrad& upstream) const;

  Action sample(const Vector& state, std::mt19937_64& rng) const;
  double log_prob(const Vector& state, const Action& action) const;
  Vector grad_log_prob(const Vector& state, const Action& action) const;

 private:
  HeadKind kind_;
  int action_dim_;
  Mlp trunk_;
  Vector log_std_;
};

/// KL(pi_theta(.|s) || pi_theta_k(.|s)).
double kl_between(const PolicyNet& theta, const PolicyNet& theta_k, const Vector& state);
/// Gradient of kl_between with respect to theta's parameters.
Vector grad_kl_between(const PolicyNet& theta, const PolicyNet& theta_k, const Vector& state);

/// Scalar state-value network.
class ValueNet {
 public:
  ValueNet(int state_dim, std::vector<int> hidden = {64, 64});

  void init(std::mt19937_64& rng);
  const Mlp& trunk() const { return trunk_; }
  int state_dim() const { return trunk_.input_dim(); }

  Eigen::Index num_params() const { return trunk_.num_params(); }
  const Vector& parameters() const { return trunk_.params(); }
  void set_parameters(const Vector& params) { trunk_.set_params(params); }

  Vector values(const Matrix& states) const;
  double value(const Vector& state) const;

  /// (1/M) sum_m (V(s_m) - target_m)^2; writes its parameter gradient if requested.
  double mse_loss(const Matrix& states, const Vector& targets, Vector* grad = nullptr) const;

 private:
  Mlp trunk_;
};

}  // namespace spu::nn
