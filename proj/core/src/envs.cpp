#include "spu/envs.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace spu::envs {

namespace {

void require_running(bool done, const char* who) {
  if (done) throw EpisodeOver(std::string(who) + ": step after episode end; call reset first");
}

}  // namespace

Gridworld::Gridworld(Options options) : options_(options) {
  if (options_.width < 1 || options_.height < 1 || options_.width * options_.height < 2) {
    throw std::invalid_argument("Gridworld: need at least two cells");
  }
  if (!(options_.slip >= 0.0 && options_.slip <= 1.0)) {
    throw std::invalid_argument("Gridworld: slip must be in [0, 1]");
  }
  if (options_.max_steps < 1) throw std::invalid_argument("Gridworld: max_steps must be positive");
}

std::string Gridworld::id() const {
  return "gridworld-" + std::to_string(options_.width) + "x" + std::to_string(options_.height);
}

int Gridworld::move_target(int from, int move) const {
  int x = from % options_.width;
  int y = from / options_.width;
  switch (move) {
    case north: y = std::min(y + 1, options_.height - 1); break;
    case south: y = std::max(y - 1, 0); break;
    case east: x = std::min(x + 1, options_.width - 1); break;
    case west: x = std::max(x - 1, 0); break;
    default: throw std::out_of_range("Gridworld: action must be in [0, 4)");
  }
  return cell(x, y);
}

Vector Gridworld::one_hot(int c) const {
  Vector v = Vector::Zero(num_cells());
  v(c) = 1.0;
  return v;
}

Vector Gridworld::reset(std::uint64_t seed) {
  rng_.seed(seed);
  position_ = start_cell();
  steps_ = 0;
  done_ = false;
  return one_hot(position_);
}

void Gridworld::set_position(int c) {
  if (c < 0 || c >= num_cells()) throw std::out_of_range("Gridworld: cell out of range");
  position_ = c;
  done_ = c == goal_cell();
}

StepResult Gridworld::step(const Action& action) {
  require_running(done_, "Gridworld");
  if (action.index < 0 || action.index >= 4) {
    throw std::out_of_range("Gridworld: action must be in [0, 4)");
  }
  int move = action.index;
  if (options_.slip > 0.0) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng_) < options_.slip) move = std::uniform_int_distribution<int>(0, 3)(rng_);
  }
  position_ = move_target(position_, move);
  ++steps_;

  StepResult result;
  result.state = one_hot(position_);
  result.terminated = position_ == goal_cell();
  result.reward = result.terminated ? options_.goal_reward : options_.step_reward;
  result.truncated = !result.terminated && steps_ >= options_.max_steps;
  done_ = result.done();
  return result;
}

tabular::FiniteMdp Gridworld::export_mdp() const {
  const int n = num_cells();
  std::vector<Eigen::MatrixXd> transition(4, Eigen::MatrixXd::Zero(n, n));
  Eigen::MatrixXd reward = Eigen::MatrixXd::Zero(n, 4);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < 4; ++a) {
      if (s == goal_cell()) {
        transition[a](s, s) = 1.0;
        continue;
      }
      for (int outcome = 0; outcome < 4; ++outcome) {
        const double p = (outcome == a ? 1.0 - options_.slip : 0.0) + options_.slip / 4.0;
        if (p == 0.0) continue;
        const int next = move_target(s, outcome);
        transition[a](s, next) += p;
        reward(s, a) += p * (next == goal_cell() ? options_.goal_reward : options_.step_reward);
      }
    }
  }
  Eigen::VectorXd initial = Eigen::VectorXd::Zero(n);
  initial(start_cell()) = 1.0;
  return {std::move(transition), std::move(reward), options_.discount, std::move(initial)};
}

Vector CartPole::reset(std::uint64_t seed) {
  rng_.seed(seed);
  std::uniform_real_distribution<double> init(-0.05, 0.05);
  for (int i = 0; i < 4; ++i) state_(i) = init(rng_);
  steps_ = 0;
  done_ = false;
  return state_;
}

void CartPole::set_state(const Vector& state) {
  if (state.size() != 4) throw std::invalid_argument("CartPole: state has 4 components");
  state_ = state;
  done_ = false;
}

StepResult CartPole::step(const Action& action) {
  require_running(done_, "CartPole");
  if (action.index != 0 && action.index != 1) {
    throw std::out_of_range("CartPole: action must be 0 or 1");
  }
  const double total_mass = mass_cart + mass_pole;
  const double pole_mass_length = mass_pole * half_length;
  const double force = action.index == 1 ? force_mag : -force_mag;
  const double x = state_(0), x_dot = state_(1), theta = state_(2), theta_dot = state_(3);
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double temp = (force + pole_mass_length * theta_dot * theta_dot * sin_t) / total_mass;
  const double theta_acc =
      (gravity * sin_t - cos_t * temp) /
      (half_length * (4.0 / 3.0 - mass_pole * cos_t * cos_t / total_mass));
  const double x_acc = temp - pole_mass_length * theta_acc * cos_t / total_mass;

  state_(0) = x + tau * x_dot;
  state_(1) = x_dot + tau * x_acc;
  state_(2) = theta + tau * theta_dot;
  state_(3) = theta_dot + tau * theta_acc;
  ++steps_;

  StepResult result;
  result.state = state_;
  result.reward = 1.0;
  result.terminated = std::abs(state_(0)) > x_limit || std::abs(state_(2)) > theta_limit;
  result.truncated = !result.terminated && steps_ >= max_steps_;
  done_ = result.done();
  return result;
}

Vector PointMass::reset(std::uint64_t seed) {
  rng_.seed(seed);
  std::uniform_real_distribution<double> init(-1.0, 1.0);
  state_.setZero();
  state_(0) = init(rng_);
  state_(1) = init(rng_);
  steps_ = 0;
  done_ = false;
  return state_;
}

void PointMass::set_state(const Vector& state) {
  if (state.size() != 4) throw std::invalid_argument("PointMass: state has 4 components");
  state_ = state;
  done_ = false;
}

StepResult PointMass::step(const Action& action) {
  require_running(done_, "PointMass");
  if (action.value.size() != 2 || !action.value.allFinite()) {
    throw std::invalid_argument("PointMass: action must be a finite 2-vector");
  }
  const Eigen::Vector2d force = action.value.cwiseMax(-1.0).cwiseMin(1.0);
  state_.tail<2>() = damping * state_.tail<2>() + dt * force;
  state_.head<2>() += dt * state_.tail<2>();
  ++steps_;

  StepResult result;
  result.state = state_;
  result.reward = -state_.head<2>().squaredNorm();
  result.truncated = steps_ >= max_steps_;
  done_ = result.done();
  return result;
}

std::unique_ptr<Env> make_env(std::string_view id) {
  if (id == "cartpole") return std::make_unique<CartPole>();
  if (id == "pointmass") return std::make_unique<PointMass>();
  constexpr std::string_view prefix = "gridworld-";
  if (id.starts_with(prefix)) {
    const std::string_view dims = id.substr(prefix.size());
    const auto sep = dims.find('x');
    Gridworld::Options options;
    if (sep != std::string_view::npos) {
      const auto w = std::from_chars(dims.data(), dims.data() + sep, options.width);
      const auto h =
          std::from_chars(dims.data() + sep + 1, dims.data() + dims.size(), options.height);
      if (w.ec == std::errc{} && w.ptr == dims.data() + sep && h.ec == std::errc{} &&
          h.ptr == dims.data() + dims.size() && options.width > 0 && options.height > 0 &&
          options.width <= 64 && options.height <= 64) {
        return std::make_unique<Gridworld>(options);
      }
    }
  }
  throw std::invalid_argument("unknown environment id '" + std::string(id) +
                              "' (expected gridworld-5x5, cartpole or pointmass)");
}

std::vector<std::string> env_ids() { return {"gridworld-5x5", "cartpole", "pointmass"}; }

}  // namespace spu::envs
