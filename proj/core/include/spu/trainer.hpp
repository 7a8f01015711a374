#pragma once

#include "spu/adam.hpp"
#include "spu/envs.hpp"
#include "spu/policy_net.hpp"
#include "spu/proximal_solver.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spu::trainer {

using nn::Matrix;
using nn::Vector;

/// Invalid configuration; field() names the offending entry.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct Ablations {
  bool no_grad_kl = false;
  bool no_dynamic_stopping = false;
  bool no_per_state_acceptance = false;

  bool operator==(const Ablations&) const = default;
};

struct SpuConfig {
  std::string env = "gridworld-5x5";
  proximal::ConstraintKind constraint_kind = proximal::ConstraintKind::forward_kl;
  double delta = 0.05 / 1.2;
  double epsilon = 0.05;
  double lambda = 1.3;
  int zeta = 30;
  double gamma = 0.99;
  double gae_beta = 0.95;
  double learn_rate = 3e-4;
  bool anneal_lr = true;
  int minibatch = 64;
  int steps_per_iter = 2048;
  int iterations = 200;
  std::vector<int> hidden{64, 64};
  bool normalize_states = true;
  /// Normalized states are clipped to [-state_clip, state_clip]; 0 disables.
  double state_clip = 10.0;
  /// Backward-KL threshold; when unset it is max batch advantage + 1.
  std::optional<double> lambda_prime;
  Ablations ablations;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  bool operator==(const SpuConfig&) const = default;
};

nlohmann::json to_json(const SpuConfig& config);
/// Missing fields take their defaults; unknown fields and wrong types are ConfigErrors.
SpuConfig config_from_json(const nlohmann::json& doc);

/// Welford running mean and population variance per state coordinate.
class RunningNormalizer {
 public:
  RunningNormalizer() = default;
  explicit RunningNormalizer(int dim) : mean_(Vector::Zero(dim)), m2_(Vector::Zero(dim)) {}

  void update(const Vector& x);
  void update_columns(const Matrix& columns);

  long count() const { return count_; }
  const Vector& mean() const { return mean_; }
  Vector variance() const;

  /// (x - mean) / max(std, 1e-8), clipped to +-clip when clip > 0. Identity before any update.
  Vector apply(const Vector& x, double clip = 0.0) const;
  Matrix apply_columns(const Matrix& columns, double clip = 0.0) const;

 private:
  long count_ = 0;
  Vector mean_;
  Vector m2_;
};

/// One iteration of on-policy samples. Column i of `states` is step i.
struct RolloutBatch {
  /// Normalized states, state_dim x N.
  Matrix states;
  nn::ActionBatch actions;
  Vector rewards;
  /// log pi_k(a_i | s_i) at collection time.
  Vector log_probs;
  Vector values;
  std::vector<char> terminated;
  std::vector<char> truncated;
  /// V(s_{i+1}) for steps that end a segment without terminating
  /// (truncation or the last step of the batch).
  std::vector<std::optional<double>> bootstrap;

  Vector advantages;
  Vector value_targets;

  Eigen::Index size() const { return rewards.size(); }
};

/// GAE(gamma, gae_beta): fills advantages and value_targets = advantages + values.
void compute_gae(RolloutBatch& batch, double gamma, double gae_beta);

/// Subtract the mean, divide by the population std; zeros when std < 1e-8.
Vector normalize_advantages(const Vector& advantages);

/// Samples for one gradient step, with the frozen pi_k outputs on the same states.
struct Minibatch {
  Matrix states;
  nn::ActionBatch actions;
  Vector advantages;
  Vector old_log_probs;
  nn::PolicyOutput old_output;
  /// L-infinity targets pi*(a_i | s_i).
  Vector linf_targets;

  Eigen::Index size() const { return states.cols(); }
};

/// Selects columns of a batch; old_full is the frozen policy evaluated on every batch state.
Minibatch make_minibatch(const RolloutBatch& batch, const nn::PolicyOutput& old_full,
                         const Vector& linf_targets, std::span<const Eigen::Index> indices);

struct UpdateGradient {
  Vector grad;
  /// Value of the scalar whose gradient this is.
  double loss = 0.0;
  /// Per-sample KL(pi_theta || pi_k) at the current parameters.
  Vector kl;
  /// Samples whose surrogate term entered the gradient.
  int accepted = 0;
  /// Samples with KL > epsilon (dropped unless acceptance is disabled).
  int over_epsilon = 0;
  /// Samples dropped because |log pi_theta - log pi_k| > 30.
  int excluded = 0;
  /// Accepted samples whose KL exceeded epsilon.
  int accepted_over_epsilon = 0;
};

struct ForwardKlOptions {
  double lambda = 1.3;
  double epsilon = 0.05;
  bool grad_kl = true;
  bool per_state_acceptance = true;
  /// When set, replaces the acceptance test (used to differentiate with the indicator held fixed).
  std::optional<std::vector<char>> frozen_indicator;
};

/**
 * (1/M) sum_i [KL_i - ratio_i A_i / lambda] 1{KL_i <= eps} and its gradient,
 * where ratio_i = pi_theta(a_i|s_i) / pi_k(a_i|s_i).
 */
UpdateGradient forward_kl_update_gradient(const nn::PolicyNet& theta, const Minibatch& mb,
                                          const ForwardKlOptions& options);

/**
 * (1/M) sum_i [KL_i + ratio_i log(lambda' - A_i)]; throws std::domain_error if
 * lambda' <= A_i. epsilon only feeds the over_epsilon diagnostic.
 */
UpdateGradient backward_kl_update_gradient(const nn::PolicyNet& theta, const Minibatch& mb,
                                           double lambda_prime, double epsilon,
                                           bool grad_kl = true);

/// (1/M) sum_i (pi_theta(a_i|s_i) - target_i)^2, densities for Gaussian heads.
UpdateGradient linf_update_gradient(const nn::PolicyNet& theta, const Minibatch& mb,
                                    double epsilon);

/// Per-sample L-infinity targets from pi_k(a_i|s_i) and advantages at a fixed lambda.
Vector linf_targets(const Vector& old_log_probs, const Vector& advantages, double lambda,
                    double epsilon);

/// One Adam step on the critic MSE; returns the loss before the step.
double fit_critic(nn::ValueNet& critic, nn::AdamState& adam, const Matrix& states,
                  const Vector& targets, double lr_multiplier = 1.0);

struct IterationMetrics {
  int iteration = 0;
  /// Environment steps taken so far, including this iteration.
  long steps = 0;
  /// Mean undiscounted return of the last 100 completed episodes; NaN before the first.
  double mean_return_100 = 0.0;
  /// Mean KL(pi_theta || pi_k) over the batch after the last epoch run.
  double mean_kl_stop = 0.0;
  int epochs_used = 0;
  /// Fraction of sample uses with per-state KL > epsilon.
  double reject_frac = 0.0;
  double critic_loss = 0.0;
  double lr = 0.0;
  long excluded_samples = 0;
  long accepted_over_epsilon = 0;
  int episodes_completed = 0;
  double wall_seconds = 0.0;
};

/// CSV columns: iter, steps, mean_return_100, mean_kl_stop, epochs_used, reject_frac, critic_loss, lr.
std::string csv_header();
std::string csv_row(const IterationMetrics& metrics);

class Trainer {
 public:
  explicit Trainer(SpuConfig config);
  Trainer(SpuConfig config, std::unique_ptr<envs::Env> env);

  const SpuConfig& config() const { return config_; }
  const nn::PolicyNet& policy() const { return policy_; }
  const nn::ValueNet& critic() const { return critic_; }
  const RunningNormalizer& normalizer() const { return normalizer_; }
  envs::Env& env() { return *env_; }
  int iteration() const { return iteration_; }
  long total_steps() const { return total_steps_; }

  /// Learning-rate multiplier for the next iteration.
  double lr_multiplier() const;

  /// Algorithm 1 once: collect, estimate advantages, run up to zeta epochs.
  IterationMetrics train_iteration();

  /// Policy snapshot used for the most recent update (pi_k), for diagnostics.
  const nn::PolicyNet& previous_policy() const { return previous_; }

 private:
  RolloutBatch collect();
  Vector normalized(const Vector& raw) const;

  SpuConfig config_;
  std::unique_ptr<envs::Env> env_;
  std::mt19937_64 rng_;
  nn::PolicyNet policy_;
  nn::PolicyNet previous_;
  nn::ValueNet critic_;
  nn::AdamState policy_adam_;
  nn::AdamState critic_adam_;
  RunningNormalizer normalizer_;

  Vector raw_state_;
  bool need_reset_ = true;
  double episode_return_ = 0.0;
  std::deque<double> recent_returns_;
  int episodes_completed_ = 0;
  int iteration_ = 0;
  long total_steps_ = 0;
};

/// Runs config.iterations iterations, writing the header and one CSV row per iteration.
std::vector<IterationMetrics> run(Trainer& trainer, std::ostream* csv);

}  // namespace spu::trainer
