#include "spu/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace spu::proximal {

namespace {

constexpr double kInitialBarrierWeight = 1.0;
constexpr double kBarrierGrowth = 20.0;
constexpr double kNewtonTolerance = 1e-12;
constexpr double kArmijo = 0.25;

struct Block {
  int state;
  std::vector<int> actions;  // support of pi_k in this state
  int offset;
};

/**
 * Convex program in barrier form:
 *   minimize  -t c^T x - sum_i log(-f_i(x))   subject to  per-block sums = 1.
 * For linf the variables are the ratios pi / pi_k and there are no equalities.
 */
class BarrierProgram {
 public:
  explicit BarrierProgram(const ProblemInstance& inst) : inst_(inst) {
    if (inst.kind == ConstraintKind::linf) {
      n_ = static_cast<int>(inst.pi_k[0].size());
      c_ = inst.adv[0];
      return;
    }
    int offset = 0;
    for (int s = 0; s < inst.num_states(); ++s) {
      Block block{s, {}, offset};
      for (int a = 0; a < inst.pi_k[s].size(); ++a) {
        if (inst.pi_k[s](a) > 0.0) block.actions.push_back(a);
      }
      offset += static_cast<int>(block.actions.size());
      blocks_.push_back(std::move(block));
    }
    n_ = offset;
    c_.resize(n_);
    q_.resize(n_);
    for (const auto& b : blocks_) {
      for (std::size_t j = 0; j < b.actions.size(); ++j) {
        c_(b.offset + static_cast<int>(j)) = inst.d(b.state) * inst.adv[b.state](b.actions[j]);
        q_(b.offset + static_cast<int>(j)) = inst.pi_k[b.state](b.actions[j]);
      }
    }
  }

  int size() const { return n_; }
  const Eigen::VectorXd& cost() const { return c_; }
  bool has_equalities() const { return !blocks_.empty(); }
  const std::vector<Block>& blocks() const { return blocks_; }

  /// Starting point pi_k (ratios of one for linf).
  Eigen::VectorXd center() const {
    if (inst_.kind == ConstraintKind::linf) return Eigen::VectorXd::Ones(n_);
    return q_;
  }

  /// Constraint values f_i(x) (all must be < 0); empty optional if x leaves the domain.
  bool constraint_values(const Eigen::VectorXd& x, std::vector<double>& f) const {
    f.clear();
    if (!x.allFinite()) return false;
    const double eps = inst_.epsilon;
    if (inst_.kind == ConstraintKind::linf) {
      double sq = 0.0;
      for (int i = 0; i < n_; ++i) {
        f.push_back(x(i) - 1.0 - eps);
        f.push_back(1.0 - eps - x(i));
        sq += (x(i) - 1.0) * (x(i) - 1.0);
      }
      f.push_back(sq - inst_.delta);
      return true;
    }
    for (int i = 0; i < n_; ++i) {
      if (!(x(i) > 0.0)) return false;
      f.push_back(-x(i));
    }
    double aggregate = 0.0;
    for (const auto& b : blocks_) {
      double div = 0.0;
      for (std::size_t j = 0; j < b.actions.size(); ++j) {
        const int i = b.offset + static_cast<int>(j);
        div += inst_.kind == ConstraintKind::forward_kl ? x(i) * std::log(x(i) / q_(i))
                                                        : q_(i) * std::log(q_(i) / x(i));
      }
      f.push_back(div - eps);
      aggregate += inst_.d(b.state) * div;
    }
    if (inst_.kind == ConstraintKind::forward_kl) f.push_back(aggregate - inst_.delta);
    return true;
  }

  static bool strictly_feasible(const std::vector<double>& f) {
    return std::all_of(f.begin(), f.end(), [](double v) { return v < 0.0; });
  }

  /// Gradient and Hessian of the barrier -sum log(-f_i) at a strictly feasible x.
  void barrier_derivatives(const Eigen::VectorXd& x, Eigen::VectorXd& grad,
                           Eigen::MatrixXd& hess) const {
    grad.setZero(n_);
    hess.setZero(n_, n_);
    const double eps = inst_.epsilon;
    if (inst_.kind == ConstraintKind::linf) {
      double sq = 0.0;
      for (int i = 0; i < n_; ++i) {
        const double upper = 1.0 + eps - x(i);
        const double lower = x(i) - (1.0 - eps);
        grad(i) += 1.0 / upper - 1.0 / lower;
        hess(i, i) += 1.0 / (upper * upper) + 1.0 / (lower * lower);
        sq += (x(i) - 1.0) * (x(i) - 1.0);
      }
      const double slack = inst_.delta - sq;
      const Eigen::VectorXd g = 2.0 * (x.array() - 1.0).matrix();
      grad += g / slack;
      hess += g * g.transpose() / (slack * slack);
      hess.diagonal().array() += 2.0 / slack;
      return;
    }

    for (int i = 0; i < n_; ++i) {
      grad(i) -= 1.0 / x(i);
      hess(i, i) += 1.0 / (x(i) * x(i));
    }
    Eigen::VectorXd agg_grad = Eigen::VectorXd::Zero(n_);
    Eigen::VectorXd agg_curv = Eigen::VectorXd::Zero(n_);
    double aggregate = 0.0;
    for (const auto& b : blocks_) {
      const int k = static_cast<int>(b.actions.size());
      const auto xs = x.segment(b.offset, k).array();
      const auto qs = q_.segment(b.offset, k).array();
      double div = 0.0;
      Eigen::VectorXd g(k);
      Eigen::VectorXd curv(k);
      if (inst_.kind == ConstraintKind::forward_kl) {
        div = (xs * (xs / qs).log()).sum();
        g = ((xs / qs).log() + 1.0).matrix();
        curv = xs.inverse().matrix();
      } else {
        div = (qs * (qs / xs).log()).sum();
        g = (-qs / xs).matrix();
        curv = (qs / xs.square()).matrix();
      }
      const double slack = eps - div;
      grad.segment(b.offset, k) += g / slack;
      hess.block(b.offset, b.offset, k, k) += g * g.transpose() / (slack * slack);
      hess.diagonal().segment(b.offset, k) += curv / slack;
      const double w = inst_.d(b.state);
      aggregate += w * div;
      agg_grad.segment(b.offset, k) = w * g;
      agg_curv.segment(b.offset, k) = w * curv;
    }
    if (inst_.kind == ConstraintKind::forward_kl) {
      const double slack = inst_.delta - aggregate;
      grad += agg_grad / slack;
      hess += agg_grad * agg_grad.transpose() / (slack * slack);
      hess.diagonal() += agg_curv / slack;
    }
  }

  std::vector<Eigen::VectorXd> to_rows(const Eigen::VectorXd& x) const {
    if (inst_.kind == ConstraintKind::linf) {
      return {inst_.pi_k[0].cwiseProduct(x)};
    }
    std::vector<Eigen::VectorXd> rows;
    for (const auto& b : blocks_) {
      Eigen::VectorXd row = Eigen::VectorXd::Zero(inst_.pi_k[b.state].size());
      double total = 0.0;
      for (std::size_t j = 0; j < b.actions.size(); ++j) total += x(b.offset + static_cast<int>(j));
      for (std::size_t j = 0; j < b.actions.size(); ++j) {
        row(b.actions[j]) = x(b.offset + static_cast<int>(j)) / total;
      }
      rows.push_back(std::move(row));
    }
    return rows;
  }

  /// A point (1 - tau) center + tau * random, shrinking tau until well inside.
  Eigen::VectorXd random_start(std::mt19937_64& rng) const {
    Eigen::VectorXd target(n_);
    if (inst_.kind == ConstraintKind::linf) {
      std::uniform_real_distribution<double> unit(-1.0, 1.0);
      for (int i = 0; i < n_; ++i) target(i) = 1.0 + inst_.epsilon * unit(rng);
    } else {
      std::gamma_distribution<double> gamma(1.0, 1.0);
      for (const auto& b : blocks_) {
        const int k = static_cast<int>(b.actions.size());
        double total = 0.0;
        for (int j = 0; j < k; ++j) total += (target(b.offset + j) = gamma(rng) + 1e-12);
        target.segment(b.offset, k) /= total;
      }
    }
    const Eigen::VectorXd base = center();
    std::vector<double> f;
    for (double tau = 1.0; tau > 1e-12; tau *= 0.5) {
      const Eigen::VectorXd x = (1.0 - tau) * base + tau * target;
      if (!constraint_values(x, f)) continue;
      if (well_inside(f)) return x;
    }
    return base;
  }

 private:
  // Every constraint value at most half its bound (in absolute terms).
  bool well_inside(const std::vector<double>& f) const {
    if (!strictly_feasible(f)) return false;
    const double eps = inst_.epsilon;
    if (inst_.kind == ConstraintKind::linf) {
      for (std::size_t i = 0; i + 1 < f.size(); ++i) {
        if (f[i] > -0.5 * eps) return false;
      }
      return f.back() <= -0.5 * inst_.delta;
    }
    const auto begin = f.begin() + n_;
    for (auto it = begin; it != begin + static_cast<long>(blocks_.size()); ++it) {
      if (*it > -0.5 * eps) return false;
    }
    if (inst_.kind == ConstraintKind::forward_kl) return f.back() <= -0.5 * inst_.delta;
    return true;
  }

  const ProblemInstance& inst_;
  int n_ = 0;
  std::vector<Block> blocks_;
  Eigen::VectorXd c_;
  Eigen::VectorXd q_;
};

struct RunResult {
  Eigen::VectorXd x;
  int newton_steps = 0;
};

RunResult run_barrier(const BarrierProgram& prog, Eigen::VectorXd x, const OracleOptions& opt) {
  const int n = prog.size();
  const auto& blocks = prog.blocks();
  const int num_eq = static_cast<int>(blocks.size());
  std::vector<double> f;
  std::vector<double> f_trial;
  if (!prog.constraint_values(x, f) || !BarrierProgram::strictly_feasible(f)) {
    throw OracleFailure("oracle: starting point is not strictly feasible");
  }
  const double m = static_cast<double>(f.size());

  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  Eigen::MatrixXd kkt(n + num_eq, n + num_eq);
  Eigen::VectorXd rhs(n + num_eq);
  int steps = 0;

  for (double t = kInitialBarrierWeight;; t *= kBarrierGrowth) {
    for (int it = 0; it < opt.max_newton_steps; ++it) {
      prog.barrier_derivatives(x, grad, hess);
      grad -= t * prog.cost();

      Eigen::VectorXd dx;
      if (num_eq > 0) {
        kkt.setZero();
        kkt.topLeftCorner(n, n) = hess;
        for (int e = 0; e < num_eq; ++e) {
          const int k = static_cast<int>(blocks[e].actions.size());
          kkt.block(n + e, blocks[e].offset, 1, k).setOnes();
          kkt.block(blocks[e].offset, n + e, k, 1).setOnes();
        }
        rhs.setZero();
        rhs.head(n) = -grad;
        dx = kkt.partialPivLu().solve(rhs).head(n);
      } else {
        dx = hess.ldlt().solve(-grad);
      }
      if (!dx.allFinite()) throw OracleFailure("oracle: singular Newton system");

      const double decrement = -grad.dot(dx);
      if (decrement * 0.5 <= kNewtonTolerance) break;

      // Backtracking with the objective change written as sums of small terms.
      double step = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 80; ++ls, step *= 0.5) {
        const Eigen::VectorXd trial = x + step * dx;
        if (!prog.constraint_values(trial, f_trial) ||
            !BarrierProgram::strictly_feasible(f_trial)) {
          continue;
        }
        double change = -t * step * prog.cost().dot(dx);
        for (std::size_t i = 0; i < f.size(); ++i) change -= std::log(f_trial[i] / f[i]);
        if (change <= -kArmijo * step * decrement) {
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      x += step * dx;
      prog.constraint_values(x, f);
      ++steps;
    }
    if (m / t < opt.gap_tolerance) break;
  }
  return {std::move(x), steps};
}

}  // namespace

OracleResult brute_force_oracle(const ProblemInstance& inst, const OracleOptions& options) {
  inst.validate();
  const BarrierProgram prog(inst);
  std::mt19937_64 rng(options.seed);

  OracleResult best;
  best.objective = -std::numeric_limits<double>::infinity();
  std::vector<double> f;
  for (int run = 0; run <= options.restarts; ++run) {
    const Eigen::VectorXd start = run == 0 ? prog.center() : prog.random_start(rng);
    const RunResult result = run_barrier(prog, start, options);
    auto rows = prog.to_rows(result.x);
    const double value = objective(inst, rows);
    best.newton_steps += result.newton_steps;
    if (value > best.objective) {
      best.objective = value;
      best.rows = std::move(rows);
    }
  }

  const ConstraintReport report = constraint_report(inst, best.rows);
  double violation = 0.0;
  if (inst.kind == ConstraintKind::linf) {
    violation = std::max(report.max_ratio_dev - inst.epsilon, report.aggregate - inst.delta);
  } else {
    violation = report.max_state_kl - inst.epsilon;
    if (inst.kind == ConstraintKind::forward_kl) {
      violation = std::max(violation, report.aggregate - inst.delta);
    }
  }
  best.max_violation = std::max(0.0, violation);
  if (best.max_violation > 1e-9) {
    throw OracleFailure("oracle: returned point violates constraints by " +
                        std::to_string(best.max_violation));
  }
  return best;
}

ProblemInstance random_instance(ConstraintKind kind, std::mt19937_64& rng, int num_states,
                                int num_actions, double delta, double epsilon) {
  std::gamma_distribution<double> gamma(1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto dirichlet = [&](int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = gamma(rng) + 1e-6;
    return Eigen::VectorXd(v / v.sum());
  };

  ProblemInstance inst;
  inst.kind = kind;
  inst.delta = delta;
  inst.epsilon = epsilon;
  if (kind == ConstraintKind::linf) {
    const int samples = num_states * num_actions;
    std::uniform_real_distribution<double> prob(0.05, 0.95);
    Eigen::VectorXd vals(samples);
    Eigen::VectorXd advs(samples);
    for (int i = 0; i < samples; ++i) {
      vals(i) = prob(rng);
      advs(i) = normal(rng);
    }
    inst.pi_k.push_back(std::move(vals));
    inst.adv.push_back(std::move(advs));
    return inst;
  }
  inst.d = dirichlet(num_states);
  for (int s = 0; s < num_states; ++s) {
    inst.pi_k.push_back(dirichlet(num_actions));
    Eigen::VectorXd adv(num_actions);
    for (int a = 0; a < num_actions; ++a) adv(a) = normal(rng);
    inst.adv.push_back(std::move(adv));
  }
  return inst;
}

}  // namespace spu::proximal
