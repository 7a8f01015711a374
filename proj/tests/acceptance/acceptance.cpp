// Acceptance suite: one PASS/FAIL line per criterion.
//
//   spu_acceptance            run every criterion
//   spu_acceptance c3 c8      run a subset
//
// Exit status is 0 iff every selected criterion passes.

#include "spu/envs.hpp"
#include "spu/oracle.hpp"
#include "spu/proximal_solver.hpp"
#include "spu/tabular_mdp.hpp"
#include "spu/trainer.hpp"

#include "test_support.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace spu;
using proximal::ConstraintKind;
using test::central_difference;
using test::MeanEstimate;
using test::relative_error;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

// ---------------------------------------------------------------------------
// c1-c3: closed forms against the interior-point oracle

struct SweepStats {
  double max_gap = 0.0;
  double max_binding_residual = 0.0;
  double max_cap_excess = -INFINITY;
  int binding = 0;
};

/// Random instance with 1-10 states, 2-8 actions, delta in [0.01, 0.2], epsilon in [delta/2, 2 delta].
proximal::ProblemInstance sweep_instance(ConstraintKind kind, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> states(1, 10);
  std::uniform_int_distribution<int> actions(2, 8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int s = states(rng);
  const int a = actions(rng);
  const double delta = 0.01 + 0.19 * unit(rng);
  const double epsilon = delta * (0.5 + 1.5 * unit(rng));
  return proximal::random_instance(kind, rng, s, a, delta, epsilon);
}

Outcome criterion_forward_kl() {
  Outcome out;
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  SweepStats st;
  for (int i = 0; i < 1000; ++i) {
    const auto inst = sweep_instance(ConstraintKind::forward_kl, rng);
    const auto closed = proximal::solve_closed_form(inst);
    const auto oracle = proximal::brute_force_oracle(inst, {.seed = static_cast<std::uint64_t>(i)});
    st.max_gap = std::max(st.max_gap, std::abs(closed.objective - oracle.objective));
    double aggregate = 0.0;
    for (int s = 0; s < inst.num_states(); ++s) {
      const double kl = kl_categorical(closed.rows[s], inst.pi_k[s]);
      aggregate += inst.d(s) * kl;
      st.max_cap_excess = std::max(st.max_cap_excess, kl - inst.epsilon);
    }
    if (closed.constraint_binding) {
      ++st.binding;
      st.max_binding_residual = std::max(st.max_binding_residual, std::abs(aggregate - inst.delta));
    }
  }
  const double elapsed = seconds_since(start);
  out.require(st.max_gap <= 1e-5, "objective gap <= 1e-5");
  out.require(st.max_binding_residual < 1e-7, "aggregate residual < 1e-7 when binding");
  out.require(st.max_cap_excess <= 1e-8, "per-state KL <= eps + 1e-8");
  out.require(elapsed < 120.0, "runtime < 2 min");
  out.detail << "1000 instances, max gap " << fmt(st.max_gap) << ", binding " << st.binding
             << ", max aggregate residual " << fmt(st.max_binding_residual)
             << ", max KL - eps " << fmt(st.max_cap_excess) << ", " << fmt(elapsed) << " s";
  return out;
}

/// Upper bound on KL(pi_k || pi) over targets whose non-argmax masses are at least the smallest
/// positive double: sum pi_k log pi_k - log(denorm_min) * (pi_k mass off the argmax set).
double representable_kl_bound(const Eigen::VectorXd& pi_k, const Eigen::VectorXd& adv) {
  const double top = adv.maxCoeff();
  double neg_entropy = 0.0;
  double off_mass = 0.0;
  for (Eigen::Index a = 0; a < pi_k.size(); ++a) {
    neg_entropy += pi_k(a) * std::log(pi_k(a));
    if (adv(a) != top) off_mass += pi_k(a);
  }
  return neg_entropy - std::log(std::numeric_limits<double>::denorm_min()) * off_mass;
}

Outcome criterion_backward_kl() {
  Outcome out;
  const auto start = Clock::now();
  std::mt19937_64 rng(202);
  SweepStats st;
  int unrepresentable = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto inst = sweep_instance(ConstraintKind::backward_kl, rng);
    const auto closed = proximal::solve_closed_form(inst);
    const auto oracle = proximal::brute_force_oracle(inst, {.seed = static_cast<std::uint64_t>(i)});
    st.max_gap = std::max(st.max_gap, std::abs(closed.objective - oracle.objective));
    for (int s = 0; s < inst.num_states(); ++s) {
      // Each state binds unless its advantages are constant.
      const bool constant = inst.adv[s].maxCoeff() - inst.adv[s].minCoeff() == 0.0;
      if (constant) continue;
      ++st.binding;
      if (representable_kl_bound(inst.pi_k[s], inst.adv[s]) < inst.epsilon) {
        ++unrepresentable;
        continue;
      }
      const double kl = kl_categorical(inst.pi_k[s], closed.rows[s]);
      st.max_binding_residual = std::max(st.max_binding_residual, std::abs(kl - inst.epsilon));
    }
  }
  const double elapsed = seconds_since(start);
  out.require(st.max_gap < 1e-5, "objective gap < 1e-5");
  out.require(st.max_binding_residual <= 1e-8, "KL(pi_k || pi*) = eps within 1e-8 when binding");
  out.require(elapsed < 120.0, "runtime < 2 min");
  out.detail << "1000 instances, max gap " << fmt(st.max_gap) << ", binding states " << st.binding
             << ", max |KL - eps| " << fmt(st.max_binding_residual) << ", states with eps beyond float64 "
             << unrepresentable << ", " << fmt(elapsed) << " s";
  return out;
}

Outcome criterion_linf() {
  Outcome out;
  const auto start = Clock::now();
  std::mt19937_64 rng(303);
  SweepStats st;
  long box_violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto inst = sweep_instance(ConstraintKind::linf, rng);
    const auto& pi = inst.pi_k[0];
    const auto& adv = inst.adv[0];
    const auto lambda = proximal::solve_linf_lambda(pi, adv, inst.delta, inst.epsilon);
    const auto sol = proximal::solve_linf(pi, adv, lambda, inst.epsilon);
    for (Eigen::Index j = 0; j < pi.size(); ++j) {
      const double t = sol.target_probs(j);
      if (t < (1.0 - inst.epsilon) * pi(j) || t > (1.0 + inst.epsilon) * pi(j)) ++box_violations;
    }
    if (const auto* binds = std::get_if<proximal::LinfBinds>(&lambda)) {
      ++st.binding;
      st.max_binding_residual = std::max(
          st.max_binding_residual,
          std::abs(proximal::linf_budget(adv, binds->lambda, inst.epsilon) - inst.delta));
    }
    const double closed = proximal::objective(inst, {sol.target_probs});
    const auto oracle = proximal::brute_force_oracle(inst, {.seed = static_cast<std::uint64_t>(i)});
    st.max_gap = std::max(st.max_gap, std::abs(closed - oracle.objective));
  }
  const double elapsed = seconds_since(start);
  out.require(box_violations == 0, "targets inside the per-sample box");
  out.require(st.max_binding_residual < 1e-7, "lambda residual < 1e-7");
  out.require(st.max_gap <= 1e-5, "objective gap <= 1e-5");
  out.require(elapsed < 60.0, "runtime < 1 min");
  out.detail << "1000 instances, box violations " << box_violations << ", binding " << st.binding
             << ", max budget residual " << fmt(st.max_binding_residual) << ", max gap "
             << fmt(st.max_gap) << ", " << fmt(elapsed) << " s";
  return out;
}

// ---------------------------------------------------------------------------
// c4: update gradients against central differences

nn::Vector normal_vector(std::mt19937_64& rng, Eigen::Index n, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  nn::Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

trainer::Minibatch random_minibatch(std::mt19937_64& rng, const nn::PolicyNet& theta_k, int m) {
  trainer::Minibatch mb;
  mb.states = nn::Matrix(theta_k.state_dim(), m);
  for (int i = 0; i < m; ++i) mb.states.col(i) = normal_vector(rng, theta_k.state_dim(), 1.0);
  mb.old_output = theta_k.forward(mb.states);
  if (theta_k.kind() == nn::HeadKind::categorical) {
    for (int i = 0; i < m; ++i) mb.actions.indices.push_back(nn::sample_action(mb.old_output, i, rng).index);
  } else {
    mb.actions.values.resize(theta_k.action_dim(), m);
    for (int i = 0; i < m; ++i) mb.actions.values.col(i) = nn::sample_action(mb.old_output, i, rng).value;
  }
  mb.old_log_probs = nn::log_prob(mb.old_output, mb.actions);
  mb.advantages = normal_vector(rng, m, 1.0);
  mb.linf_targets = trainer::linf_targets(mb.old_log_probs, mb.advantages, 1.3, 0.05);
  return mb;
}

Outcome criterion_gradients() {
  Outcome out;
  const auto start = Clock::now();
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> dims(2, 5);
  std::uniform_int_distribution<int> width(3, 10);
  std::map<std::string, double> worst{{"forward", 0.0}, {"backward", 0.0}, {"linf", 0.0}};
  for (int trial = 0; trial < 100; ++trial) {
    const auto kind = trial % 2 ? nn::HeadKind::gaussian : nn::HeadKind::categorical;
    const int sd = dims(rng);
    const int ad = dims(rng);
    const std::vector<int> hidden{width(rng), width(rng)};
    nn::PolicyNet theta_k(kind, sd, ad, hidden);
    nn::PolicyNet theta(kind, sd, ad, hidden);
    theta_k.set_parameters(normal_vector(rng, theta_k.num_params(), 0.4));
    // theta near theta_k, as after a few epochs.
    theta.set_parameters(theta_k.parameters() + normal_vector(rng, theta_k.num_params(), 0.1));
    const auto mb = random_minibatch(rng, theta_k, 16);
    const nn::Vector x = theta.parameters();
    auto at = [&](const nn::Vector& p) {
      nn::PolicyNet net = theta;
      net.set_parameters(p);
      return net;
    };

    trainer::ForwardKlOptions fwd;
    const auto live = trainer::forward_kl_update_gradient(theta, mb, fwd);
    std::vector<char> indicator(mb.size());
    for (Eigen::Index i = 0; i < mb.size(); ++i) indicator[i] = live.kl(i) <= fwd.epsilon;
    fwd.frozen_indicator = indicator;
    const auto fwd_num = central_difference(
        [&](const nn::Vector& p) { return trainer::forward_kl_update_gradient(at(p), mb, fwd).loss; }, x);
    worst["forward"] = std::max(worst["forward"], relative_error(live.grad, fwd_num));

    const double lp = mb.advantages.maxCoeff() + 1.0;
    const auto bwd = trainer::backward_kl_update_gradient(theta, mb, lp, 0.05);
    const auto bwd_num = central_difference(
        [&](const nn::Vector& p) { return trainer::backward_kl_update_gradient(at(p), mb, lp, 0.05).loss; }, x);
    worst["backward"] = std::max(worst["backward"], relative_error(bwd.grad, bwd_num));

    const auto linf = trainer::linf_update_gradient(theta, mb, 0.05);
    const auto linf_num = central_difference(
        [&](const nn::Vector& p) { return trainer::linf_update_gradient(at(p), mb, 0.05).loss; }, x);
    worst["linf"] = std::max(worst["linf"], relative_error(linf.grad, linf_num));
  }
  const double elapsed = seconds_since(start);
  for (const auto& [name, err] : worst) out.require(err < 1e-4, name + " relative error < 1e-4");
  out.require(elapsed < 120.0, "runtime < 2 min");
  out.detail << "100 instances each, max relative error forward " << fmt(worst["forward"])
             << ", backward " << fmt(worst["backward"]) << ", linf " << fmt(worst["linf"]) << ", "
             << fmt(elapsed) << " s";
  return out;
}

// ---------------------------------------------------------------------------
// c5-c7: training runs

std::vector<trainer::IterationMetrics> train(trainer::SpuConfig config) {
  trainer::Trainer t(std::move(config));
  return trainer::run(t, nullptr);
}

Outcome criterion_trust_region() {
  Outcome out;
  const auto start = Clock::now();
  trainer::SpuConfig config;  // defaults: gridworld-5x5, 200 iterations
  const auto metrics = train(config);
  double worst_kl = 0.0;
  long accepted_over = 0;
  double max_reject = 0.0;
  for (const auto& m : metrics) {
    worst_kl = std::max(worst_kl, m.mean_kl_stop);
    accepted_over += m.accepted_over_epsilon;
    max_reject = std::max(max_reject, m.reject_frac);
  }
  out.require(metrics.size() == 200, "200 iterations");
  out.require(worst_kl <= 1.5 * config.delta, "mean KL at stop <= 1.5 delta");
  out.require(accepted_over == 0, "no accepted sample with KL > eps");
  out.detail << "max mean KL at stop " << fmt(worst_kl) << " (limit " << fmt(1.5 * config.delta)
             << "), accepted samples over eps " << accepted_over << ", max reject_frac "
             << fmt(max_reject) << ", " << fmt(seconds_since(start)) << " s";
  return out;
}

/// Optimal expected undiscounted return of a gridworld episode: backward induction over the
/// step cap, with time-dependent greedy actions.
double gridworld_episode_optimum(const envs::Gridworld& grid) {
  const auto mdp = grid.export_mdp();
  const int n = mdp.num_states();
  nn::Vector v = nn::Vector::Zero(n);
  for (int t = 0; t < grid.options().max_steps; ++t) {
    nn::Vector next(n);
    for (int s = 0; s < n; ++s) {
      double best = -INFINITY;
      for (int a = 0; a < mdp.num_actions(); ++a) {
        best = std::max(best, mdp.reward()(s, a) + mdp.transition_matrix(a).row(s).dot(v));
      }
      next(s) = best;
    }
    v = next;
  }
  return mdp.initial_dist().dot(v);
}

double random_pointmass_return(int episodes) {
  envs::PointMass env;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  MeanEstimate est;
  for (int e = 0; e < episodes; ++e) {
    env.reset(10'000 + e);
    double total = 0.0;
    for (;;) {
      const auto r = env.step(nn::Action::continuous(Eigen::Vector2d(u(rng), u(rng))));
      total += r.reward;
      if (r.done()) break;
    }
    est.add(total);
  }
  return est.mean;
}

std::vector<double> final_returns(const std::string& env, int iterations, int seeds) {
  std::vector<double> finals;
  for (int s = 0; s < seeds; ++s) {
    trainer::SpuConfig c;
    c.env = env;
    c.iterations = iterations;
    c.seed = static_cast<std::uint64_t>(s);
    finals.push_back(train(c).back().mean_return_100);
  }
  return finals;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + fmt(x);
  return s;
}

Outcome criterion_learning() {
  Outcome out;
  const auto start = Clock::now();

  const double grid_opt = gridworld_episode_optimum(envs::Gridworld());
  const auto grid = final_returns("gridworld-5x5", 200, 5);
  const double grid_med = median(grid);
  out.require(grid_med >= 0.95 * grid_opt, "gridworld median >= 95% of optimum");

  const auto cart = final_returns("cartpole", 300, 5);
  const double cart_med = median(cart);
  out.require(cart_med >= 450.0, "cartpole median >= 450");

  const double random_pm = random_pointmass_return(1000);
  const auto pm = final_returns("pointmass", 100, 5);
  // Returns are costs (-|p|^2): 3x better than random means a third of its cost.
  const double pm_limit = random_pm / 3.0;
  out.require(*std::min_element(pm.begin(), pm.end()) >= pm_limit, "pointmass every seed >= 3x random");

  const double elapsed = seconds_since(start);
  out.require(elapsed < 1200.0, "runtime < 20 min");
  out.detail << "gridworld median " << fmt(grid_med) << " vs optimum " << fmt(grid_opt) << " [" << join(grid)
             << "]; cartpole median " << fmt(cart_med) << " [" << join(cart) << "]; pointmass ["
             << join(pm) << "] vs random " << fmt(random_pm) << " (limit " << fmt(pm_limit) << "); "
             << fmt(elapsed) << " s";
  return out;
}

Outcome criterion_ablations() {
  Outcome out;
  const auto start = Clock::now();
  constexpr int kSeeds = 10;
  constexpr int kIterations = 20;
  std::vector<double> full_kl, nogradkl_kl, nopsa_reject, nopsa_peak;
  for (int s = 0; s < kSeeds; ++s) {
    trainer::SpuConfig c;
    c.iterations = kIterations;
    c.seed = static_cast<std::uint64_t>(s);
    auto mean_of = [](const std::vector<trainer::IterationMetrics>& ms, auto field) {
      double total = 0.0;
      for (const auto& m : ms) total += field(m);
      return total / static_cast<double>(ms.size());
    };
    auto kl = [](const trainer::IterationMetrics& m) { return m.mean_kl_stop; };
    full_kl.push_back(mean_of(train(c), kl));

    auto a = c;
    a.ablations.no_grad_kl = true;
    nogradkl_kl.push_back(mean_of(train(a), kl));

    auto b = c;
    b.ablations.no_per_state_acceptance = true;
    const auto ablated = train(b);
    nopsa_reject.push_back(mean_of(ablated, [](const trainer::IterationMetrics& m) { return m.reject_frac; }));
    nopsa_peak.push_back(std::max_element(ablated.begin(), ablated.end(), [](const auto& x, const auto& y) {
                           return x.reject_frac < y.reject_frac;
                         })->reject_frac);
  }
  const double full = median(full_kl);
  const double nogradkl = median(nogradkl_kl);
  const double reject = median(nopsa_reject);
  out.require(nogradkl > full, "no_grad_kl final KL > full algorithm");
  out.require(reject > 0.05, "no_per_state_acceptance would-reject fraction > 5%");
  out.detail << kSeeds << " seeds x " << kIterations << " gridworld iterations, median final KL full "
             << fmt(full) << " vs no_grad_kl " << fmt(nogradkl) << ", median would-reject fraction "
             << fmt(reject) << " (median per-iteration peak " << fmt(median(nopsa_peak)) << "), "
             << fmt(seconds_since(start)) << " s";
  return out;
}

// ---------------------------------------------------------------------------
// c8: tabular quantities against Monte Carlo

int sample_next(const tabular::FiniteMdp& mdp, int s, int a, std::mt19937_64& rng) {
  return test::sample_index(mdp.transition_matrix(a).row(s).transpose(), rng);
}

Outcome criterion_exactness() {
  Outcome out;
  const auto start = Clock::now();
  std::vector<std::pair<std::string, tabular::FiniteMdp>> fixtures;
  fixtures.emplace_back("two_state_chain", tabular::mdp_from_json(test::load_fixture("two_state_chain.json")));
  envs::Gridworld::Options small;
  small.width = 3;
  small.height = 2;
  small.discount = 0.9;
  fixtures.emplace_back("gridworld-3x2", envs::Gridworld(small).export_mdp());

  double worst_z = 0.0;
  int comparisons = 0;
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& [name, mdp] : fixtures) {
    const int ns = mdp.num_states();
    const int na = mdp.num_actions();
    Eigen::MatrixXd probs(ns, na);
    for (int s = 0; s < ns; ++s) {
      for (int a = 0; a < na; ++a) probs(s, a) = 0.5 + unit(rng);
      probs.row(s) /= probs.row(s).sum();
    }
    const tabular::TabularPolicy pol(probs);
    auto act = [&](int s) { return test::sample_index(probs.row(s).transpose(), rng); };
    auto z = [&](double estimate, double exact, double se) {
      ++comparisons;
      const double score = se > 0.0 ? std::abs(estimate - exact) / se : (estimate == exact ? 0.0 : INFINITY);
      worst_z = std::max(worst_z, score);
    };
    // Geometric termination with continuation probability gamma: the undiscounted reward sum is
    // an unbiased estimate of the discounted value, and the stopping state is distributed as d^pi.
    auto rollout = [&](int s, int a, int* stop_state) {
      double total = mdp.reward()(s, a);
      while (unit(rng) < mdp.discount()) {
        s = sample_next(mdp, s, a, rng);
        a = act(s);
        total += mdp.reward()(s, a);
      }
      if (stop_state) *stop_state = s;
      return total;
    };

    MeanEstimate j;
    std::vector<MeanEstimate> visits(ns);
    for (int i = 0; i < 1'000'000; ++i) {
      const int s0 = test::sample_index(mdp.initial_dist(), rng);
      int stop = 0;
      j.add(rollout(s0, act(s0), &stop));
      for (int s = 0; s < ns; ++s) visits[s].add(s == stop ? 1.0 : 0.0);
    }
    z(j.mean, tabular::exact_return(mdp, pol), j.standard_error());
    const auto d = tabular::exact_state_distribution(mdp, pol).weights;
    for (int s = 0; s < ns; ++s) z(visits[s].mean, d(s), visits[s].standard_error());

    const auto adv = tabular::exact_advantage(mdp, pol);
    for (int s = 0; s < ns; ++s) {
      std::vector<MeanEstimate> q(na);
      for (int a = 0; a < na; ++a) {
        for (int i = 0; i < 50'000; ++i) q[a].add(rollout(s, a, nullptr));
      }
      for (int a = 0; a < na; ++a) {
        double estimate = q[a].mean;
        double var = 0.0;
        for (int b = 0; b < na; ++b) {
          const double coef = (a == b ? 1.0 : 0.0) - probs(s, b);
          estimate -= probs(s, b) * q[b].mean;
          var += coef * coef * q[b].variance() / static_cast<double>(q[b].n);
        }
        z(estimate, adv(s, a), std::sqrt(var));
      }
    }
  }

  double worst_mean = 0.0;
  std::gamma_distribution<double> g(1.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int ns = 1 + trial % 10;
    const int na = 2 + trial % 7;
    std::vector<Eigen::MatrixXd> p(na, Eigen::MatrixXd(ns, ns));
    Eigen::MatrixXd r(ns, na), probs(ns, na);
    for (int a = 0; a < na; ++a) {
      for (int s = 0; s < ns; ++s) {
        for (int t = 0; t < ns; ++t) p[a](s, t) = g(rng) + 1e-9;
        p[a].row(s) /= p[a].row(s).sum();
        r(s, a) = n01(rng);
        probs(s, a) = g(rng) + 1e-9;
      }
    }
    for (int s = 0; s < ns; ++s) probs.row(s) /= probs.row(s).sum();
    Eigen::VectorXd init = Eigen::VectorXd::Constant(ns, 1.0 / ns);
    const tabular::FiniteMdp mdp(p, r, 0.5 + 0.49 * unit(rng), init);
    const tabular::TabularPolicy pol(probs);
    const Eigen::VectorXd mean = probs.cwiseProduct(tabular::exact_advantage(mdp, pol)).rowwise().sum();
    worst_mean = std::max(worst_mean, mean.cwiseAbs().maxCoeff());
  }
  out.require(worst_z <= 3.0, "all Monte Carlo estimates within 3 SE");
  out.require(worst_mean <= 1e-10, "sum_a pi A = 0 within 1e-10");
  out.detail << comparisons << " Monte Carlo comparisons, worst " << fmt(worst_z)
             << " SE; max |sum_a pi A| over 1000 random MDPs " << fmt(worst_mean) << ", "
             << fmt(seconds_since(start)) << " s";
  return out;
}

// ---------------------------------------------------------------------------
// c9: CLI determinism

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome criterion_determinism() {
  Outcome out;
  const auto start = Clock::now();
  const std::string bin = SPU_CLI_PATH;
  const fs::path root = fs::temp_directory_path() / "spu_acceptance_c9";
  fs::remove_all(root);
  fs::create_directories(root);
  struct Case {
    std::string name;
    std::string args;
  };
  const std::vector<Case> cases{
      {"gridworld-forward", "--env gridworld-5x5 --iters 5 --seeds 2"},
      {"cartpole-backward", "--env cartpole --constraint backward-kl --iters 3 --seeds 2"},
      {"pointmass-linf", "--env pointmass --constraint linf --iters 3 --seeds 2 --jobs 2"},
      {"gridworld-ablations", "--env gridworld-5x5 --iters 3 --no-grad-kl --no-per-state-acceptance"},
  };
  int compared = 0;
  for (const auto& c : cases) {
    const fs::path a = root / c.name / "a";
    const fs::path b = root / c.name / "b";
    const std::string log = " > " + (root / (c.name + ".log")).string() + " 2>&1";
    const bool ran = shell(bin + " train " + c.args + " --quiet --out " + a.string() + log) == 0 &&
                     shell(bin + " train --quiet --manifest " + (a / "manifest.json").string() +
                           " --out " + b.string() + log) == 0;
    out.require(ran, c.name + " runs exit 0");
    if (!ran) continue;
    for (const auto& entry : fs::directory_iterator(a)) {
      if (entry.path().extension() != ".csv") continue;
      ++compared;
      out.require(slurp(entry.path()) == slurp(b / entry.path().filename()),
                  c.name + "/" + entry.path().filename().string() + " byte-identical");
    }
  }
  out.require(compared == 7, "7 CSVs compared");
  out.detail << compared << " CSVs from " << cases.size() << " manifests compared byte for byte, "
             << fmt(seconds_since(start)) << " s";
  return out;
}

struct Criterion {
  const char* id;
  const char* title;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {"c1", "forward-KL closed form vs oracle", criterion_forward_kl},
      {"c2", "backward-KL closed form vs oracle", criterion_backward_kl},
      {"c3", "L-infinity closed form vs oracle", criterion_linf},
      {"c4", "update gradients vs finite differences", criterion_gradients},
      {"c5", "trust-region behavior on gridworld", criterion_trust_region},
      {"c6", "learning at desk scale", criterion_learning},
      {"c7", "ablation direction", criterion_ablations},
      {"c8", "tabular exactness vs Monte Carlo", criterion_exactness},
      {"c9", "CLI determinism under a manifest", criterion_determinism},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> selected(argv + 1, argv + argc);
  for (const auto& id : selected) {
    if (std::none_of(criteria().begin(), criteria().end(), [&](const Criterion& c) { return id == c.id; })) {
      std::cerr << "unknown criterion " << id << " (expected c1..c9)\n";
      return 2;
    }
  }
  bool all_pass = true;
  for (const auto& c : criteria()) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    Outcome result;
    try {
      result = c.run();
    } catch (const std::exception& e) {
      result.pass = false;
      result.detail << "exception: " << e.what();
    }
    all_pass &= result.pass;
    std::cout << c.id << " " << (result.pass ? "PASS" : "FAIL") << " " << c.title << ": "
              << result.detail.str() << std::endl;
  }
  return all_pass ? 0 : 1;
}
