#pragma once

#include "spu/categorical.hpp"

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <vector>

namespace spu::tabular {

/**
 * Finite discounted MDP with an explicit transition tensor.
 *
 * transition(s, a, s') is stored action-major: one S x S matrix per action,
 * so that the policy-averaged transition matrix is a weighted sum of
 * contiguous blocks. All rows are validated on construction.
 */
class FiniteMdp {
 public:
  /// transition[s][a][s'], reward[s][a]. Throws std::invalid_argument on any
  /// violated invariant (row sums, nonnegativity, discount range, shapes).
  FiniteMdp(const std::vector<std::vector<std::vector<double>>>& transition,
            const std::vector<std::vector<double>>& reward, double discount,
            const std::vector<double>& initial_dist);

  FiniteMdp(std::vector<Eigen::MatrixXd> transition_by_action, Eigen::MatrixXd reward,
            double discount, Eigen::VectorXd initial_dist);

  int num_states() const { return static_cast<int>(reward_.rows()); }
  int num_actions() const { return static_cast<int>(reward_.cols()); }
  double discount() const { return discount_; }

  double transition(int s, int a, int next) const { return transition_[a](s, next); }
  /// S x S matrix P_a(s, s').
  const Eigen::MatrixXd& transition_matrix(int a) const { return transition_[a]; }
  const Eigen::MatrixXd& reward() const { return reward_; }
  const Eigen::VectorXd& initial_dist() const { return initial_dist_; }

  /// Same dynamics with states relabelled: new state i is old state perm[i].
  FiniteMdp permuted(const std::vector<int>& perm) const;

 private:
  void validate() const;

  std::vector<Eigen::MatrixXd> transition_;
  Eigen::MatrixXd reward_;
  double discount_;
  Eigen::VectorXd initial_dist_;
};

/// Row-stochastic S x A matrix of action probabilities.
class TabularPolicy {
 public:
  explicit TabularPolicy(Eigen::MatrixXd probs);

  static TabularPolicy uniform(int num_states, int num_actions);
  static TabularPolicy deterministic(const std::vector<int>& actions, int num_actions);

  const Eigen::MatrixXd& probs() const { return probs_; }
  double operator()(int s, int a) const { return probs_(s, a); }
  int num_states() const { return static_cast<int>(probs_.rows()); }
  int num_actions() const { return static_cast<int>(probs_.cols()); }

 private:
  Eigen::MatrixXd probs_;
};

/// Discounted future state visitation distribution d^pi.
struct StateDistribution {
  Eigen::VectorXd weights;
};

/// Policy-averaged quantities shared by the exact computations.
Eigen::MatrixXd policy_transition(const FiniteMdp& mdp, const TabularPolicy& pol);
Eigen::VectorXd policy_reward(const FiniteMdp& mdp, const TabularPolicy& pol);

/// V^pi by a dense LU solve of (I - gamma P_pi) V = r_pi.
Eigen::VectorXd state_values(const FiniteMdp& mdp, const TabularPolicy& pol);
/// Q^pi(s, a) = r(s, a) + gamma sum_s' P(s'|s,a) V^pi(s').
Eigen::MatrixXd action_values(const FiniteMdp& mdp, const TabularPolicy& pol);

/// J(pi) = initial_dist . V^pi.
double exact_return(const FiniteMdp& mdp, const TabularPolicy& pol);
StateDistribution exact_state_distribution(const FiniteMdp& mdp, const TabularPolicy& pol);
/// A^pi = Q^pi - V^pi; rows have zero mean under pi.
Eigen::MatrixXd exact_advantage(const FiniteMdp& mdp, const TabularPolicy& pol);

/**
 * Importance-weighted surrogate of J(pol) - J(pol_k), computed with the exact
 * d^{pol_k} and A^{pol_k}. Throws SupportError if pol puts mass where pol_k
 * has none.
 */
double surrogate_objective(const FiniteMdp& mdp, const TabularPolicy& pol_k,
                           const TabularPolicy& pol);

/// sum_s d^{pol_k}(s) KL(pol(.|s) || pol_k(.|s)).
double aggregated_kl(const FiniteMdp& mdp, const TabularPolicy& pol, const TabularPolicy& pol_k);

/// Undiscounted expected return over a fixed horizon, by backward recursion.
double finite_horizon_return(const FiniteMdp& mdp, const TabularPolicy& pol, int horizon);

struct OptimalSolution {
  TabularPolicy policy;
  Eigen::VectorXd values;
  int iterations = 0;
};

/// Policy iteration with exact evaluation; ties break toward the lower action index.
OptimalSolution solve_optimal(const FiniteMdp& mdp, int max_iterations = 1000);

nlohmann::json to_json(const FiniteMdp& mdp);
FiniteMdp mdp_from_json(const nlohmann::json& doc);

}  // namespace spu::tabular
