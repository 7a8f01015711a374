#include "spu/tabular_mdp.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <stdexcept>
#include <string>

namespace spu::tabular {

namespace {

constexpr double kRowTolerance = 1e-12;

void check_distribution(const Eigen::Ref<const Eigen::VectorXd>& row, const std::string& what) {
  for (Eigen::Index i = 0; i < row.size(); ++i) {
    if (!std::isfinite(row(i)) || row(i) < 0.0) {
      throw std::invalid_argument(what + ": negative or non-finite probability");
    }
  }
  if (std::abs(row.sum() - 1.0) > kRowTolerance) {
    throw std::invalid_argument(what + ": probabilities sum to " + std::to_string(row.sum()));
  }
}

void check_shapes(const FiniteMdp& mdp, const TabularPolicy& pol) {
  if (pol.num_states() != mdp.num_states() || pol.num_actions() != mdp.num_actions()) {
    throw std::invalid_argument("policy shape " + std::to_string(pol.num_states()) + "x" +
                                std::to_string(pol.num_actions()) + " does not match MDP " +
                                std::to_string(mdp.num_states()) + "x" +
                                std::to_string(mdp.num_actions()));
  }
}

}  // namespace

FiniteMdp::FiniteMdp(const std::vector<std::vector<std::vector<double>>>& transition,
                     const std::vector<std::vector<double>>& reward, double discount,
                     const std::vector<double>& initial_dist)
    : discount_(discount) {
  const auto num_states = static_cast<Eigen::Index>(transition.size());
  if (num_states == 0 || transition.front().empty()) {
    throw std::invalid_argument("FiniteMdp: need at least one state and one action");
  }
  const auto num_actions = static_cast<Eigen::Index>(transition.front().size());
  transition_.assign(num_actions, Eigen::MatrixXd::Zero(num_states, num_states));
  for (Eigen::Index s = 0; s < num_states; ++s) {
    if (static_cast<Eigen::Index>(transition[s].size()) != num_actions) {
      throw std::invalid_argument("FiniteMdp: ragged transition tensor at state " +
                                  std::to_string(s));
    }
    for (Eigen::Index a = 0; a < num_actions; ++a) {
      const auto& row = transition[s][a];
      if (static_cast<Eigen::Index>(row.size()) != num_states) {
        throw std::invalid_argument("FiniteMdp: transition row has wrong length");
      }
      for (Eigen::Index next = 0; next < num_states; ++next) transition_[a](s, next) = row[next];
    }
  }
  if (static_cast<Eigen::Index>(reward.size()) != num_states) {
    throw std::invalid_argument("FiniteMdp: reward has wrong number of states");
  }
  reward_.resize(num_states, num_actions);
  for (Eigen::Index s = 0; s < num_states; ++s) {
    if (static_cast<Eigen::Index>(reward[s].size()) != num_actions) {
      throw std::invalid_argument("FiniteMdp: reward row has wrong length");
    }
    for (Eigen::Index a = 0; a < num_actions; ++a) reward_(s, a) = reward[s][a];
  }
  initial_dist_ = Eigen::Map<const Eigen::VectorXd>(initial_dist.data(),
                                                    static_cast<Eigen::Index>(initial_dist.size()));
  validate();
}

FiniteMdp::FiniteMdp(std::vector<Eigen::MatrixXd> transition_by_action, Eigen::MatrixXd reward,
                     double discount, Eigen::VectorXd initial_dist)
    : transition_(std::move(transition_by_action)),
      reward_(std::move(reward)),
      discount_(discount),
      initial_dist_(std::move(initial_dist)) {
  validate();
}

void FiniteMdp::validate() const {
  const Eigen::Index num_states = reward_.rows();
  const Eigen::Index num_actions = reward_.cols();
  if (num_states == 0 || num_actions == 0) {
    throw std::invalid_argument("FiniteMdp: need at least one state and one action");
  }
  if (static_cast<Eigen::Index>(transition_.size()) != num_actions) {
    throw std::invalid_argument("FiniteMdp: transition/reward action count mismatch");
  }
  if (!(discount_ > 0.0 && discount_ < 1.0)) {
    throw std::invalid_argument("FiniteMdp: discount must lie in (0, 1)");
  }
  if (!reward_.allFinite()) throw std::invalid_argument("FiniteMdp: non-finite reward");
  for (Eigen::Index a = 0; a < num_actions; ++a) {
    if (transition_[a].rows() != num_states || transition_[a].cols() != num_states) {
      throw std::invalid_argument("FiniteMdp: transition block has wrong shape");
    }
    for (Eigen::Index s = 0; s < num_states; ++s) {
      check_distribution(transition_[a].row(s).transpose(),
                         "FiniteMdp: transition row (s=" + std::to_string(s) +
                             ", a=" + std::to_string(a) + ")");
    }
  }
  if (initial_dist_.size() != num_states) {
    throw std::invalid_argument("FiniteMdp: initial_dist has wrong length");
  }
  check_distribution(initial_dist_, "FiniteMdp: initial_dist");
}

FiniteMdp FiniteMdp::permuted(const std::vector<int>& perm) const {
  const int n = num_states();
  if (static_cast<int>(perm.size()) != n) throw std::invalid_argument("permuted: bad permutation");
  std::vector<Eigen::MatrixXd> transition(num_actions(), Eigen::MatrixXd(n, n));
  Eigen::MatrixXd reward(n, num_actions());
  Eigen::VectorXd init(n);
  for (int i = 0; i < n; ++i) {
    init(i) = initial_dist_(perm[i]);
    reward.row(i) = reward_.row(perm[i]);
    for (int a = 0; a < num_actions(); ++a) {
      for (int j = 0; j < n; ++j) transition[a](i, j) = transition_[a](perm[i], perm[j]);
    }
  }
  return FiniteMdp(std::move(transition), std::move(reward), discount_, std::move(init));
}

TabularPolicy::TabularPolicy(Eigen::MatrixXd probs) : probs_(std::move(probs)) {
  if (probs_.rows() == 0 || probs_.cols() == 0) {
    throw std::invalid_argument("TabularPolicy: empty");
  }
  for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
    check_distribution(probs_.row(s).transpose(), "TabularPolicy row " + std::to_string(s));
  }
}

TabularPolicy TabularPolicy::uniform(int num_states, int num_actions) {
  return TabularPolicy(Eigen::MatrixXd::Constant(num_states, num_actions, 1.0 / num_actions));
}

TabularPolicy TabularPolicy::deterministic(const std::vector<int>& actions, int num_actions) {
  Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(actions.size()),
                                                num_actions);
  for (std::size_t s = 0; s < actions.size(); ++s) {
    probs(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
  }
  return TabularPolicy(std::move(probs));
}

Eigen::MatrixXd policy_transition(const FiniteMdp& mdp, const TabularPolicy& pol) {
  check_shapes(mdp, pol);
  Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(mdp.num_states(), mdp.num_states());
  for (int a = 0; a < mdp.num_actions(); ++a) {
    p_pi += pol.probs().col(a).asDiagonal() * mdp.transition_matrix(a);
  }
  return p_pi;
}

Eigen::VectorXd policy_reward(const FiniteMdp& mdp, const TabularPolicy& pol) {
  check_shapes(mdp, pol);
  return pol.probs().cwiseProduct(mdp.reward()).rowwise().sum();
}

Eigen::VectorXd state_values(const FiniteMdp& mdp, const TabularPolicy& pol) {
  const Eigen::Index n = mdp.num_states();
  const Eigen::MatrixXd system =
      Eigen::MatrixXd::Identity(n, n) - mdp.discount() * policy_transition(mdp, pol);
  return system.partialPivLu().solve(policy_reward(mdp, pol));
}

Eigen::MatrixXd action_values(const FiniteMdp& mdp, const TabularPolicy& pol) {
  const Eigen::VectorXd values = state_values(mdp, pol);
  Eigen::MatrixXd q = mdp.reward();
  for (int a = 0; a < mdp.num_actions(); ++a) {
    q.col(a) += mdp.discount() * mdp.transition_matrix(a) * values;
  }
  return q;
}

double exact_return(const FiniteMdp& mdp, const TabularPolicy& pol) {
  return mdp.initial_dist().dot(state_values(mdp, pol));
}

StateDistribution exact_state_distribution(const FiniteMdp& mdp, const TabularPolicy& pol) {
  const Eigen::Index n = mdp.num_states();
  const double gamma = mdp.discount();
  const Eigen::MatrixXd system =
      Eigen::MatrixXd::Identity(n, n) - gamma * policy_transition(mdp, pol).transpose();
  return {system.partialPivLu().solve((1.0 - gamma) * mdp.initial_dist())};
}

Eigen::MatrixXd exact_advantage(const FiniteMdp& mdp, const TabularPolicy& pol) {
  const Eigen::VectorXd values = state_values(mdp, pol);
  Eigen::MatrixXd adv = mdp.reward();
  for (int a = 0; a < mdp.num_actions(); ++a) {
    adv.col(a) += mdp.discount() * mdp.transition_matrix(a) * values;
  }
  adv.colwise() -= values;
  return adv;
}

double surrogate_objective(const FiniteMdp& mdp, const TabularPolicy& pol_k,
                           const TabularPolicy& pol) {
  check_shapes(mdp, pol);
  const Eigen::VectorXd d = exact_state_distribution(mdp, pol_k).weights;
  const Eigen::MatrixXd adv = exact_advantage(mdp, pol_k);
  double total = 0.0;
  for (int s = 0; s < mdp.num_states(); ++s) {
    double inner = 0.0;
    for (int a = 0; a < mdp.num_actions(); ++a) {
      if (pol(s, a) <= 0.0) continue;
      if (pol_k(s, a) <= 0.0) {
        throw SupportError("surrogate_objective: pol has mass on (s=" + std::to_string(s) +
                           ", a=" + std::to_string(a) + ") where pol_k is zero");
      }
      inner += pol_k(s, a) * (pol(s, a) / pol_k(s, a)) * adv(s, a);
    }
    total += d(s) * inner;
  }
  return total / (1.0 - mdp.discount());
}

double aggregated_kl(const FiniteMdp& mdp, const TabularPolicy& pol, const TabularPolicy& pol_k) {
  check_shapes(mdp, pol);
  const Eigen::VectorXd d = exact_state_distribution(mdp, pol_k).weights;
  double total = 0.0;
  for (int s = 0; s < mdp.num_states(); ++s) {
    total += d(s) * kl_categorical(pol.probs().row(s).transpose(), pol_k.probs().row(s).transpose());
  }
  return total;
}

double finite_horizon_return(const FiniteMdp& mdp, const TabularPolicy& pol, int horizon) {
  if (horizon < 0) throw std::invalid_argument("finite_horizon_return: negative horizon");
  const Eigen::MatrixXd p_pi = policy_transition(mdp, pol);
  const Eigen::VectorXd r_pi = policy_reward(mdp, pol);
  Eigen::VectorXd values = Eigen::VectorXd::Zero(mdp.num_states());
  for (int t = 0; t < horizon; ++t) values = r_pi + p_pi * values;
  return mdp.initial_dist().dot(values);
}

OptimalSolution solve_optimal(const FiniteMdp& mdp, int max_iterations) {
  std::vector<int> actions(mdp.num_states(), 0);
  for (int it = 1; it <= max_iterations; ++it) {
    const TabularPolicy pol = TabularPolicy::deterministic(actions, mdp.num_actions());
    const Eigen::MatrixXd q = action_values(mdp, pol);
    bool changed = false;
    for (int s = 0; s < mdp.num_states(); ++s) {
      int best = actions[s];
      for (int a = 0; a < mdp.num_actions(); ++a) {
        if (q(s, a) > q(s, best) + 1e-12) best = a;
      }
      if (best != actions[s]) {
        actions[s] = best;
        changed = true;
      }
    }
    if (!changed) {
      return {pol, state_values(mdp, pol), it};
    }
  }
  throw std::runtime_error("solve_optimal: policy iteration did not converge");
}

nlohmann::json to_json(const FiniteMdp& mdp) {
  const int n = mdp.num_states();
  const int k = mdp.num_actions();
  nlohmann::json transition = nlohmann::json::array();
  nlohmann::json reward = nlohmann::json::array();
  for (int s = 0; s < n; ++s) {
    nlohmann::json per_action = nlohmann::json::array();
    nlohmann::json reward_row = nlohmann::json::array();
    for (int a = 0; a < k; ++a) {
      std::vector<double> row(n);
      for (int next = 0; next < n; ++next) row[next] = mdp.transition(s, a, next);
      per_action.push_back(row);
      reward_row.push_back(mdp.reward()(s, a));
    }
    transition.push_back(std::move(per_action));
    reward.push_back(std::move(reward_row));
  }
  return {{"num_states", n},
          {"num_actions", k},
          {"transition", std::move(transition)},
          {"reward", std::move(reward)},
          {"discount", mdp.discount()},
          {"initial_dist", std::vector<double>(mdp.initial_dist().data(),
                                               mdp.initial_dist().data() + n)}};
}

FiniteMdp mdp_from_json(const nlohmann::json& doc) {
  FiniteMdp mdp(doc.at("transition").get<std::vector<std::vector<std::vector<double>>>>(),
                doc.at("reward").get<std::vector<std::vector<double>>>(),
                doc.at("discount").get<double>(),
                doc.at("initial_dist").get<std::vector<double>>());
  if (doc.contains("num_states") && doc.at("num_states").get<int>() != mdp.num_states()) {
    throw std::invalid_argument("mdp_from_json: num_states disagrees with transition tensor");
  }
  if (doc.contains("num_actions") && doc.at("num_actions").get<int>() != mdp.num_actions()) {
    throw std::invalid_argument("mdp_from_json: num_actions disagrees with transition tensor");
  }
  return mdp;
}

}  // namespace spu::tabular
