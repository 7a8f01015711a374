#pragma once

#include "spu/policy_net.hpp"
#include "spu/tabular_mdp.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace spu::envs {

using nn::Action;
using nn::Vector;

/// Raised by step() when the episode has already ended.
class EpisodeOver : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct ActionSpace {
  /// Number of discrete actions, or 0 for a continuous box.
  int num_discrete = 0;
  /// Dimension of the continuous box; bounds are [low, high] per coordinate.
  int box_dim = 0;
  double low = 0.0;
  double high = 0.0;

  bool discrete() const { return num_discrete > 0; }
  /// Output dimension a policy head needs for this space.
  int head_dim() const { return discrete() ? num_discrete : box_dim; }
};

struct StepResult {
  Vector state;
  double reward = 0.0;
  /// Reached a terminal state: no bootstrapping past it.
  bool terminated = false;
  /// Cut off by the step cap: the next state still has a value.
  bool truncated = false;

  bool done() const { return terminated || truncated; }
};

class Env {
 public:
  virtual ~Env() = default;

  virtual std::string id() const = 0;
  virtual int state_dim() const = 0;
  virtual ActionSpace action_space() const = 0;

  /// Starts an episode; the seed fully determines the episode given the actions.
  virtual Vector reset(std::uint64_t seed) = 0;
  virtual StepResult step(const Action& action) = 0;
};

/**
 * W x H grid with 4 actions (N, S, E, W). The agent starts in cell (0, 0)
 * and the goal is (W-1, H-1). With probability `slip` the intended action is
 * replaced by a uniformly random one; moves into a wall leave the agent in
 * place. Entering the goal pays +1 and ends the episode, every other step
 * pays -0.01, and episodes are truncated after `max_steps` steps.
 */
class Gridworld : public Env {
 public:
  enum Move { north = 0, south = 1, east = 2, west = 3 };

  struct Options {
    int width = 5;
    int height = 5;
    double slip = 0.05;
    int max_steps = 100;
    double step_reward = -0.01;
    double goal_reward = 1.0;
    /// Discount stored in the exported MDP.
    double discount = 0.99;
  };

  Gridworld() : Gridworld(Options{}) {}
  explicit Gridworld(Options options);

  std::string id() const override;
  int state_dim() const override { return num_cells(); }
  ActionSpace action_space() const override { return {4, 0, 0.0, 0.0}; }

  Vector reset(std::uint64_t seed) override;
  StepResult step(const Action& action) override;

  const Options& options() const { return options_; }
  int num_cells() const { return options_.width * options_.height; }
  int cell(int x, int y) const { return y * options_.width + x; }
  int start_cell() const { return cell(0, 0); }
  int goal_cell() const { return cell(options_.width - 1, options_.height - 1); }
  /// Deterministic successor of a move, ignoring slip.
  int move_target(int from, int move) const;

  int position() const { return position_; }
  /// Places the agent on a cell mid-episode; for tests and tabular evaluation.
  void set_position(int cell);

  Vector one_hot(int cell) const;

  /**
   * Exact model of the same dynamics. The goal is absorbing with zero
   * reward; reward[s][a] is the expected one-step reward from s. The step
   * cap is not part of the model.
   */
  tabular::FiniteMdp export_mdp() const;

 private:
  Options options_;
  std::mt19937_64 rng_;
  int position_ = 0;
  int steps_ = 0;
  bool done_ = true;
};

/// Classic cart-pole balance task with Euler integration and a 500-step cap.
class CartPole : public Env {
 public:
  static constexpr double gravity = 9.8;
  static constexpr double mass_cart = 1.0;
  static constexpr double mass_pole = 0.1;
  static constexpr double half_length = 0.5;
  static constexpr double force_mag = 10.0;
  static constexpr double tau = 0.02;
  static constexpr double theta_limit = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;
  static constexpr double x_limit = 2.4;

  explicit CartPole(int max_steps = 500) : max_steps_(max_steps) {}

  std::string id() const override { return "cartpole"; }
  int state_dim() const override { return 4; }
  ActionSpace action_space() const override { return {2, 0, 0.0, 0.0}; }

  Vector reset(std::uint64_t seed) override;
  StepResult step(const Action& action) override;

  const Vector& state() const { return state_; }
  void set_state(const Vector& state);

 private:
  int max_steps_;
  std::mt19937_64 rng_;
  Vector state_ = Vector::Zero(4);
  int steps_ = 0;
  bool done_ = true;
};

/**
 * 2-D point mass driven by a force clipped to [-1, 1]^2:
 * v <- 0.95 v + 0.1 u, p <- p + 0.1 v. Reward is -|p - target|^2 with the
 * target at the origin; episodes last 200 steps and start at a uniform
 * random position in [-1, 1]^2 at rest.
 */
class PointMass : public Env {
 public:
  static constexpr double damping = 0.95;
  static constexpr double dt = 0.1;

  explicit PointMass(int max_steps = 200) : max_steps_(max_steps) {}

  std::string id() const override { return "pointmass"; }
  int state_dim() const override { return 4; }
  ActionSpace action_space() const override { return {0, 2, -1.0, 1.0}; }

  Vector reset(std::uint64_t seed) override;
  StepResult step(const Action& action) override;

  const Vector& state() const { return state_; }
  void set_state(const Vector& state);

 private:
  int max_steps_;
  std::mt19937_64 rng_;
  Vector state_ = Vector::Zero(4);
  int steps_ = 0;
  bool done_ = true;
};

/// Known ids: gridworld-5x5 (and gridworld-WxH), cartpole, pointmass.
std::unique_ptr<Env> make_env(std::string_view id);
std::vector<std::string> env_ids();

}  // namespace spu::envs
