#pragma once

#include "spu/categorical.hpp"

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace spu::proximal {

/// Proximity criteria with closed-form optimal non-parameterized policies.
enum class ConstraintKind { forward_kl, backward_kl, linf };

std::string_view to_string(ConstraintKind kind);
/// Accepts "forward-kl", "backward-kl", "linf". Throws std::invalid_argument otherwise.
ConstraintKind parse_constraint_kind(std::string_view name);

// ---------------------------------------------------------------------------
// Forward KL: tilt pi_k(a) exp(A(a) / lambda), per-state caps and an
// aggregate budget weighted by the state distribution.

/**
 * Returns pi_k(a) exp(A(a) / lambda) / Z, evaluated in the log domain with the
 * maximum exponent subtracted. Actions with pi_k(a) = 0 stay at zero.
 * Throws std::invalid_argument for lambda <= 0 or non-finite advantages.
 */
CategoricalRow forward_kl_tilt(const CategoricalRow& pi_k, const Eigen::VectorXd& adv,
                               double lambda);

/// lambda -> 0+ limit of the tilt: pi_k restricted to the argmax set of A.
CategoricalRow forward_kl_argmax_limit(const CategoricalRow& pi_k, const Eigen::VectorXd& adv);

/// Supremum over lambda of KL(tilt || pi_k): -log pi_k(argmax set).
double max_forward_kl(const CategoricalRow& pi_k, const Eigen::VectorXd& adv);

struct LambdaBinds {
  double lambda;
};
/// The per-state cap cannot bind: every tilt stays within epsilon.
struct LambdaNeverBinds {
  double max_kl;
};
using PerStateLambda = std::variant<LambdaBinds, LambdaNeverBinds>;

/// lambda_s with KL(tilt(lambda_s) || pi_k) = epsilon, by bisection in log(lambda).
PerStateLambda solve_per_state_lambda(const CategoricalRow& pi_k, const Eigen::VectorXd& adv,
                                      double epsilon);

struct ForwardKlSolution {
  std::vector<CategoricalRow> targets;
  /// Aggregate multiplier; empty when the aggregate budget cannot be exhausted.
  std::optional<double> lambda;
  /// Temperature used per state; empty entries mean the zero-temperature limit.
  std::vector<std::optional<double>> per_state_lambda;
  /// Membership in the set of states whose cap is inactive at lambda.
  std::vector<bool> in_gamma;
  double aggregate_kl = 0.0;
  double objective = 0.0;

  bool aggregate_slack() const { return !lambda.has_value(); }
};

/**
 * Optimal policy maximizing sum_s d(s) E_pi[A(s, .)] subject to
 * sum_s d(s) KL(pi || pi_k)[s] <= delta and KL(pi || pi_k)[s] <= epsilon.
 *
 * The aggregate multiplier is found by bisection on the full piecewise
 * solution, recomputing cap membership for every candidate.
 */
ForwardKlSolution solve_forward_kl(const Eigen::VectorXd& d_weights,
                                   const std::vector<CategoricalRow>& pi_k_rows,
                                   const std::vector<Eigen::VectorXd>& adv_rows, double delta,
                                   double epsilon);

// ---------------------------------------------------------------------------
// Backward KL: pi*(a) = pi_k(a) lambda_norm / (lambda_prime - A(a)), with
// E_{pi_k}[log(pi_k / pi*)] = epsilon.

struct BackwardKlSolution {
  CategoricalRow target;
  double lambda_prime;
  double lambda_norm;
};
/// Constant advantages (or a single action): pi_k itself is optimal.
struct BackwardKlSlack {
  CategoricalRow target;
};
using BackwardKlResult = std::variant<BackwardKlSolution, BackwardKlSlack>;

/// Target for given lambda_prime > max A; normalization fixes lambda_norm.
BackwardKlSolution backward_kl_target(const CategoricalRow& pi_k, const Eigen::VectorXd& adv,
                                      double lambda_prime);

/// Requires pi_k > 0 everywhere; see solve_backward_kl_on_support otherwise.
BackwardKlResult solve_backward_kl(const CategoricalRow& pi_k, const Eigen::VectorXd& adv,
                                   double epsilon);

/// Drops zero-probability actions, solves, and reinserts them as zeros.
CategoricalRow solve_backward_kl_on_support(const CategoricalRow& pi_k,
                                            const Eigen::VectorXd& adv, double epsilon);

const CategoricalRow& target_of(const BackwardKlResult& result);

// ---------------------------------------------------------------------------
// L-infinity: per-sample ratio box [1 - eps, 1 + eps] plus a squared budget.

struct LinfSolution {
  Eigen::VectorXd target_probs;
  /// +infinity when every ratio sits on the box boundary.
  double lambda;
};

struct LinfBinds {
  double lambda;
};
/// The squared budget exceeds the fully clipped value.
struct LinfSlack {};
using LinfLambda = std::variant<LinfBinds, LinfSlack>;

/// pi_k * min(1 + lambda A, 1 + eps) for A >= 0, pi_k * max(1 + lambda A, 1 - eps) otherwise.
LinfSolution solve_linf(const Eigen::VectorXd& pi_k_vals, const Eigen::VectorXd& advs,
                        double lambda, double epsilon);
LinfSolution solve_linf(const Eigen::VectorXd& pi_k_vals, const Eigen::VectorXd& advs,
                        const LinfLambda& lambda, double epsilon);

/// sum_i clip(lambda A_i, -eps, eps)^2.
double linf_budget(const Eigen::VectorXd& advs, double lambda, double epsilon);

/// lambda with linf_budget = delta, by bisection.
LinfLambda solve_linf_lambda(const Eigen::VectorXd& pi_k_vals, const Eigen::VectorXd& advs,
                             double delta, double epsilon);

// ---------------------------------------------------------------------------
// Whole problem instances, shared by the oracle, the CLI and the tests.

struct ProblemInstance {
  ConstraintKind kind = ConstraintKind::forward_kl;
  /// State weights; ignored for linf.
  Eigen::VectorXd d;
  /// One row per state. For linf a single row of per-sample pi_k values.
  std::vector<Eigen::VectorXd> pi_k;
  std::vector<Eigen::VectorXd> adv;
  double delta = 0.0;
  double epsilon = 0.0;

  int num_states() const { return static_cast<int>(pi_k.size()); }
  /// Throws std::invalid_argument on inconsistent shapes or parameters.
  void validate() const;
};

/// sum_s d(s) sum_a pi(a|s) A(s,a), or sum_i A_i pi_i / pi_k_i for linf.
double objective(const ProblemInstance& inst, const std::vector<Eigen::VectorXd>& rows);

struct ConstraintReport {
  double max_state_kl = 0.0;  // forward/backward: max per-state divergence
  double aggregate = 0.0;     // forward: weighted KL; linf: squared budget
  double max_ratio_dev = 0.0; // linf: max |pi/pi_k - 1|
};
ConstraintReport constraint_report(const ProblemInstance& inst,
                                   const std::vector<Eigen::VectorXd>& rows);

struct ClosedFormSolution {
  std::vector<Eigen::VectorXd> rows;
  double objective = 0.0;
  bool constraint_binding = false;
  /// Dual variables: forward {lambda}, backward {lambda'_s ...}, linf {lambda}.
  std::vector<double> duals;
};

/// Backward-KL states whose epsilon needs a target mass below the smallest double get the
/// lambda' -> max A limit (dual = max A) instead of throwing.
ClosedFormSolution solve_closed_form(const ProblemInstance& inst);

/**
 * {"constraint": "forward-kl", "d": [...], "pi_k": [[...]], "adv": [[...]],
 *  "delta": x, "epsilon": y}. "constraint" defaults to forward-kl, "d" to
 * uniform weights; flat "pi_k"/"adv" arrays are read as a single row.
 */
nlohmann::json to_json(const ProblemInstance& inst);
ProblemInstance instance_from_json(const nlohmann::json& doc);

}  // namespace spu::proximal
