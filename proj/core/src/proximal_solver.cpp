#include "spu/proximal_solver.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace spu::proximal {

namespace {

constexpr double kBracketLow = 1e-8;
constexpr double kBracketHigh = 1e8;
constexpr double kBracketFloor = 1e-300;
constexpr double kBracketCeiling = 1e300;
constexpr int kMaxBisections = 200;
constexpr double kResidualTolerance = 1e-13;

/**
 * Root of a nonincreasing residual g on (0, inf). Starts from
 * [kBracketLow, kBracketHigh], expands geometrically until g(lo) > 0 > g(hi),
 * then bisects in log space. Returns nullopt if no sign change is found.
 */
template <class Residual>
std::optional<double> bisect_nonincreasing(Residual&& g) {
  double lo = kBracketLow;
  double hi = kBracketHigh;
  double g_lo = g(lo);
  while (g_lo <= 0.0) {
    if (g_lo == 0.0) return lo;
    if (lo <= kBracketFloor) return std::nullopt;
    hi = lo;
    lo = std::max(lo * 1e-4, kBracketFloor);
    g_lo = g(lo);
  }
  double g_hi = g(hi);
  while (g_hi > 0.0) {
    if (hi >= kBracketCeiling) return std::nullopt;
    lo = hi;
    g_lo = g_hi;
    hi = std::min(hi * 1e4, kBracketCeiling);
    g_hi = g(hi);
  }
  if (g_hi == 0.0) return hi;

  double best = std::abs(g_lo) < std::abs(g_hi) ? lo : hi;
  double best_residual = std::min(std::abs(g_lo), std::abs(g_hi));
  for (int it = 0; it < kMaxBisections; ++it) {
    const double mid = std::sqrt(lo) * std::sqrt(hi);
    if (!(mid > lo && mid < hi)) break;
    const double g_mid = g(mid);
    if (std::abs(g_mid) < best_residual) {
      best = mid;
      best_residual = std::abs(g_mid);
    }
    if (best_residual <= kResidualTolerance) break;
    if (g_mid > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return best;
}

void require_finite(const Eigen::VectorXd& adv, const char* who) {
  if (!adv.allFinite()) throw std::invalid_argument(std::string(who) + ": non-finite advantage");
}

void require_same_size(const CategoricalRow& pi_k, const Eigen::VectorXd& adv, const char* who) {
  if (adv.size() != pi_k.size()) {
    throw std::invalid_argument(std::string(who) + ": advantage/probability size mismatch");
  }
}

double max_on_support(const CategoricalRow& pi_k, const Eigen::VectorXd& adv) {
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < pi_k.size(); ++a) {
    if (pi_k[a] > 0.0) best = std::max(best, adv(a));
  }
  return best;
}

double tilt_kl(const CategoricalRow& pi_k, const Eigen::VectorXd& adv, double lambda) {
  return kl_categorical(forward_kl_tilt(pi_k, adv, lambda), pi_k);
}

}  // namespace

std::string_view to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::forward_kl:
      return "forward-kl";
    case ConstraintKind::backward_kl:
      return "backward-kl";
    case ConstraintKind::linf:
      return "linf";
  }
  return "unknown";
}

ConstraintKind parse_constraint_kind(std::string_view name) {
  if (name == "forward-kl") return ConstraintKind::forward_kl;
  if (name == "backward-kl") return ConstraintKind::backward_kl;
  if (name == "linf") return ConstraintKind::linf;
  throw std::invalid_argument("unknown constraint kind '" + std::string(name) +
                              "' (expected forward-kl, backward-kl or linf)");
}

// --- forward KL ------------------------------------------------------------

CategoricalRow forward_kl_tilt(const CategoricalRow& pi_k, const Eigen::VectorXd& adv,
                               double lambda) {
  require_same_size(pi_k, adv, "forward_kl_tilt");
  require_finite(adv, "forward_kl_tilt");
  if (!(lambda > 0.0)) throw std::invalid_argument("forward_kl_tilt: lambda must be > 0");

  const int n = pi_k.size();
  Eigen::VectorXd logits(n);
  double shift = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < n; ++a) {
    if (pi_k[a] > 0.0) {
      logits(a) = std::log(pi_k[a]) + adv(a) / lambda;
      shift = std::max(shift, logits(a));
    }
  }
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(n);
  for (int a = 0; a < n; ++a) {
    if (pi_k[a] > 0.0) weights(a) = std::exp(logits(a) - shift);
  }
  return CategoricalRow(weights / weights.sum());
}

CategoricalRow forward_kl_argmax_limit(const CategoricalRow& pi_k, const Eigen::VectorXd& adv) {
  require_same_size(pi_k, adv, "forward_kl_argmax_limit");
  const double top = max_on_support(pi_k, adv);
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(pi_k.size());
  for (int a = 0; a < pi_k.size(); ++a) {
    if (pi_k[a] > 0.0 && adv(a) == top) weights(a) = pi_k[a];
  }
  return CategoricalRow::from_weights(weights);
}

double max_forward_kl(const CategoricalRow& pi_k, const Eigen::VectorXd& adv) {
  require_same_size(pi_k, adv, "max_forward_kl");
  const double top = max_on_support(pi_k, adv);
  double mass = 0.0;
  for (int a = 0; a < pi_k.size(); ++a) {
    if (pi_k[a] > 0.0 && adv(a) == top) mass += pi_k[a];
  }
  return std::max(0.0, -std::log(std::min(mass, 1.0)));
}

PerStateLambda solve_per_state_lambda(const CategoricalRow& pi_k, const Eigen::VectorXd& adv,
                                      double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("solve_per_state_lambda: epsilon must be > 0");
  require_finite(adv, "solve_per_state_lambda");
  const double sup = max_forward_kl(pi_k, adv);
  if (sup <= epsilon) return LambdaNeverBinds{sup};

  auto root = bisect_nonincreasing(
      [&](double lambda) { return tilt_kl(pi_k, adv, lambda) - epsilon; });
  // sup > epsilon guarantees a sign change inside the representable range
  // unless the excess is below double resolution; treat that as non-binding.
  if (!root) return LambdaNeverBinds{sup};
  return LambdaBinds{*root};
}

ForwardKlSolution solve_forward_kl(const Eigen::VectorXd& d_weights,
                                   const std::vector<CategoricalRow>& pi_k_rows,
                                   const std::vector<Eigen::VectorXd>& adv_rows, double delta,
                                   double epsilon) {
  const std::size_t num_states = pi_k_rows.size();
  if (num_states == 0) throw std::invalid_argument("solve_forward_kl: empty state list");
  if (adv_rows.size() != num_states || static_cast<std::size_t>(d_weights.size()) != num_states) {
    throw std::invalid_argument("solve_forward_kl: state count mismatch");
  }
  if (!(delta > 0.0)) throw std::invalid_argument("solve_forward_kl: delta must be > 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("solve_forward_kl: epsilon must be > 0");

  std::vector<PerStateLambda> caps;
  caps.reserve(num_states);
  double saturated = 0.0;
  for (std::size_t s = 0; s < num_states; ++s) {
    caps.push_back(solve_per_state_lambda(pi_k_rows[s], adv_rows[s], epsilon));
    if (std::holds_alternative<LambdaBinds>(caps.back())) {
      saturated += d_weights(s) * epsilon;
    } else {
      saturated += d_weights(s) * std::get<LambdaNeverBinds>(caps.back()).max_kl;
    }
  }

  // Effective temperature of state s at aggregate multiplier lambda.
  auto temperature = [&](std::size_t s, double lambda) {
    if (const auto* binds = std::get_if<LambdaBinds>(&caps[s])) return std::max(lambda, binds->lambda);
    return lambda;
  };
  auto aggregate_at = [&](double lambda) {
    double total = 0.0;
    for (std::size_t s = 0; s < num_states; ++s) {
      if (d_weights(s) == 0.0) continue;
      total += d_weights(s) * tilt_kl(pi_k_rows[s], adv_rows[s], temperature(s, lambda));
    }
    return total;
  };

  ForwardKlSolution sol;
  sol.per_state_lambda.resize(num_states);
  sol.in_gamma.resize(num_states);
  std::optional<double> lambda;
  if (saturated > delta) {
    lambda = bisect_nonincreasing([&](double l) { return aggregate_at(l) - delta; });
  }

  for (std::size_t s = 0; s < num_states; ++s) {
    const auto* binds = std::get_if<LambdaBinds>(&caps[s]);
    if (lambda) {
      const double temp = temperature(s, *lambda);
      sol.in_gamma[s] = !binds || *lambda >= binds->lambda;
      sol.per_state_lambda[s] = temp;
      sol.targets.push_back(forward_kl_tilt(pi_k_rows[s], adv_rows[s], temp));
    } else if (binds) {
      sol.in_gamma[s] = false;
      sol.per_state_lambda[s] = binds->lambda;
      sol.targets.push_back(forward_kl_tilt(pi_k_rows[s], adv_rows[s], binds->lambda));
    } else {
      sol.in_gamma[s] = true;
      sol.per_state_lambda[s] = std::nullopt;
      sol.targets.push_back(forward_kl_argmax_limit(pi_k_rows[s], adv_rows[s]));
    }
  }
  sol.lambda = lambda;
  for (std::size_t s = 0; s < num_states; ++s) {
    sol.aggregate_kl += d_weights(s) * kl_categorical(sol.targets[s], pi_k_rows[s]);
    sol.objective += d_weights(s) * sol.targets[s].probs().dot(adv_rows[s]);
  }
  return sol;
}

// --- backward KL -----------------------------------------------------------

BackwardKlSolution backward_kl_target(const CategoricalRow& pi_k, const Eigen::VectorXd& adv,
                                      double lambda_prime) {
  require_same_size(pi_k, adv, "backward_kl_target");
  if (!(lambda_prime > adv.maxCoeff())) {
    throw std::invalid_argument("backward_kl_target: lambda' must exceed max advantage");
  }
  const Eigen::VectorXd weights = pi_k.probs().array() / (lambda_prime - adv.array());
  const double lambda_norm = 1.0 / weights.sum();
  return {CategoricalRow(weights * lambda_norm), lambda_prime, lambda_norm};
}

namespace {

// lambda' - A_a as (max A - A_a) + gap, so gaps far below the ulp of max A survive.
Eigen::VectorXd backward_kl_offsets(const Eigen::VectorXd& adv, double gap) {
  return (adv.maxCoeff() - adv.array()) + gap;
}

}  // namespace

BackwardKlResult solve_backward_kl(const CategoricalRow& pi_k, const Eigen::VectorXd& adv,
                                   double epsilon) {
  require_same_size(pi_k, adv, "solve_backward_kl");
  require_finite(adv, "solve_backward_kl");
  if (!(epsilon > 0.0)) throw std::invalid_argument("solve_backward_kl: epsilon must be > 0");
  for (int a = 0; a < pi_k.size(); ++a) {
    if (!(pi_k[a] > 0.0)) {
      throw std::invalid_argument("solve_backward_kl: pi_k must have full support");
    }
  }
  const double top = adv.maxCoeff();
  if (pi_k.size() == 1 || adv.minCoeff() == top) return BackwardKlSlack{pi_k};

  // KL(pi_k || pi*) at lambda' = top + gap, written as
  // sum_a pi_k log(lambda' - A) + log sum_b pi_k(b) / (lambda' - A_b).
  auto kl_at_gap = [&](double gap) {
    const Eigen::VectorXd offsets = backward_kl_offsets(adv, gap);
    double log_term = 0.0;
    double norm = 0.0;
    for (int a = 0; a < pi_k.size(); ++a) {
      const double c = offsets(a);
      log_term += pi_k[a] * std::log(c);
      norm += pi_k[a] / c;
    }
    return log_term + std::log(norm);
  };
  auto root = bisect_nonincreasing([&](double gap) { return kl_at_gap(gap) - epsilon; });
  if (!root) {
    throw std::domain_error("solve_backward_kl: epsilon " + std::to_string(epsilon) +
                            " is not reachable within the representable lambda' range");
  }
  const Eigen::VectorXd weights = pi_k.probs().array() / backward_kl_offsets(adv, *root).array();
  const double lambda_norm = 1.0 / weights.sum();
  return BackwardKlSolution{CategoricalRow(weights * lambda_norm), top + *root, lambda_norm};
}

CategoricalRow solve_backward_kl_on_support(const CategoricalRow& pi_k,
                                            const Eigen::VectorXd& adv, double epsilon) {
  require_same_size(pi_k, adv, "solve_backward_kl_on_support");
  std::vector<int> support;
  for (int a = 0; a < pi_k.size(); ++a) {
    if (pi_k[a] > 0.0) support.push_back(a);
  }
  const auto n = static_cast<Eigen::Index>(support.size());
  Eigen::VectorXd sub_probs(n);
  Eigen::VectorXd sub_adv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sub_probs(i) = pi_k[support[i]];
    sub_adv(i) = adv(support[i]);
  }
  const auto result = solve_backward_kl(CategoricalRow::from_weights(sub_probs), sub_adv, epsilon);
  const auto& sub_target = target_of(result);
  Eigen::VectorXd full = Eigen::VectorXd::Zero(pi_k.size());
  for (Eigen::Index i = 0; i < n; ++i) full(support[i]) = sub_target[static_cast<int>(i)];
  return CategoricalRow::from_weights(full);
}

const CategoricalRow& target_of(const BackwardKlResult& result) {
  return std::visit([](const auto& r) -> const CategoricalRow& { return r.target; }, result);
}

// --- L-infinity ------------------------------------------------------------

LinfSolution solve_linf(const Eigen::VectorXd& pi_k_vals, const Eigen::VectorXd& advs,
                        double lambda, double epsilon) {
  if (pi_k_vals.size() != advs.size()) throw std::invalid_argument("solve_linf: size mismatch");
  if (!(lambda > 0.0)) throw std::invalid_argument("solve_linf: lambda must be > 0");
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("solve_linf: epsilon must lie in (0, 1)");
  }
  LinfSolution sol{Eigen::VectorXd(pi_k_vals.size()), lambda};
  for (Eigen::Index i = 0; i < advs.size(); ++i) {
    if (!(pi_k_vals(i) > 0.0)) throw std::invalid_argument("solve_linf: pi_k must be positive");
    double ratio = 1.0;
    if (advs(i) > 0.0) {
      ratio = std::min(1.0 + lambda * advs(i), 1.0 + epsilon);
    } else if (advs(i) < 0.0) {
      ratio = std::max(1.0 + lambda * advs(i), 1.0 - epsilon);
    }
    sol.target_probs(i) = pi_k_vals(i) * ratio;
  }
  return sol;
}

LinfSolution solve_linf(const Eigen::VectorXd& pi_k_vals, const Eigen::VectorXd& advs,
                        const LinfLambda& lambda, double epsilon) {
  if (const auto* binds = std::get_if<LinfBinds>(&lambda)) {
    return solve_linf(pi_k_vals, advs, binds->lambda, epsilon);
  }
  return solve_linf(pi_k_vals, advs, std::numeric_limits<double>::infinity(), epsilon);
}

double linf_budget(const Eigen::VectorXd& advs, double lambda, double epsilon) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < advs.size(); ++i) {
    if (advs(i) == 0.0) continue;
    const double dev = std::clamp(lambda * advs(i), -epsilon, epsilon);
    total += dev * dev;
  }
  return total;
}

LinfLambda solve_linf_lambda(const Eigen::VectorXd& pi_k_vals, const Eigen::VectorXd& advs,
                             double delta, double epsilon) {
  if (pi_k_vals.size() != advs.size()) {
    throw std::invalid_argument("solve_linf_lambda: size mismatch");
  }
  if (!(delta > 0.0)) throw std::invalid_argument("solve_linf_lambda: delta must be > 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("solve_linf_lambda: epsilon must be > 0");
  const double saturated = linf_budget(advs, std::numeric_limits<double>::infinity(), epsilon);
  if (saturated <= delta) return LinfSlack{};
  // Residual delta - budget(lambda) is nonincreasing in lambda.
  auto root = bisect_nonincreasing(
      [&](double lambda) { return delta - linf_budget(advs, lambda, epsilon); });
  if (!root) return LinfSlack{};
  return LinfBinds{*root};
}

// --- instances -------------------------------------------------------------

void ProblemInstance::validate() const {
  if (pi_k.empty()) throw std::invalid_argument("instance: empty pi_k");
  if (adv.size() != pi_k.size()) throw std::invalid_argument("instance: pi_k/adv row mismatch");
  if (!(delta > 0.0)) throw std::invalid_argument("instance: delta must be > 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("instance: epsilon must be > 0");
  for (std::size_t s = 0; s < pi_k.size(); ++s) {
    if (pi_k[s].size() != adv[s].size() || pi_k[s].size() == 0) {
      throw std::invalid_argument("instance: row " + std::to_string(s) + " size mismatch");
    }
    if (!adv[s].allFinite()) throw std::invalid_argument("instance: non-finite advantage");
  }
  if (kind == ConstraintKind::linf) {
    if (pi_k.size() != 1) throw std::invalid_argument("instance: linf expects a single row");
    if (!(epsilon < 1.0)) throw std::invalid_argument("instance: linf epsilon must be < 1");
    if ((pi_k[0].array() <= 0.0).any()) {
      throw std::invalid_argument("instance: linf pi_k values must be positive");
    }
    return;
  }
  if (d.size() != static_cast<Eigen::Index>(pi_k.size())) {
    throw std::invalid_argument("instance: d has wrong length");
  }
  if ((d.array() < 0.0).any()) throw std::invalid_argument("instance: negative state weight");
  for (const auto& row : pi_k) (void)CategoricalRow(row);
}

double objective(const ProblemInstance& inst, const std::vector<Eigen::VectorXd>& rows) {
  if (inst.kind == ConstraintKind::linf) {
    return (inst.adv[0].array() * rows[0].array() / inst.pi_k[0].array()).sum();
  }
  double total = 0.0;
  for (std::size_t s = 0; s < rows.size(); ++s) total += inst.d(s) * rows[s].dot(inst.adv[s]);
  return total;
}

ConstraintReport constraint_report(const ProblemInstance& inst,
                                   const std::vector<Eigen::VectorXd>& rows) {
  ConstraintReport report;
  if (inst.kind == ConstraintKind::linf) {
    const Eigen::ArrayXd dev = rows[0].array() / inst.pi_k[0].array() - 1.0;
    report.max_ratio_dev = dev.abs().maxCoeff();
    report.aggregate = dev.square().sum();
    return report;
  }
  for (std::size_t s = 0; s < rows.size(); ++s) {
    const double kl = inst.kind == ConstraintKind::forward_kl
                          ? kl_categorical(rows[s], inst.pi_k[s])
                          : kl_categorical(inst.pi_k[s], rows[s]);
    report.max_state_kl = std::max(report.max_state_kl, kl);
    report.aggregate += inst.d(s) * kl;
  }
  return report;
}

ClosedFormSolution solve_closed_form(const ProblemInstance& inst) {
  inst.validate();
  ClosedFormSolution out;
  switch (inst.kind) {
    case ConstraintKind::forward_kl: {
      std::vector<CategoricalRow> rows;
      for (const auto& row : inst.pi_k) rows.emplace_back(row);
      const auto sol = solve_forward_kl(inst.d, rows, inst.adv, inst.delta, inst.epsilon);
      for (const auto& t : sol.targets) out.rows.push_back(t.probs());
      out.constraint_binding = !sol.aggregate_slack();
      out.duals.push_back(sol.lambda.value_or(0.0));
      break;
    }
    case ConstraintKind::backward_kl: {
      for (std::size_t s = 0; s < inst.pi_k.size(); ++s) {
        const CategoricalRow pi_k(inst.pi_k[s]);
        bool full_support = (inst.pi_k[s].array() > 0.0).all();
        if (full_support) {
          try {
            const auto result = solve_backward_kl(pi_k, inst.adv[s], inst.epsilon);
            out.rows.push_back(target_of(result).probs());
            if (const auto* sol = std::get_if<BackwardKlSolution>(&result)) {
              out.duals.push_back(sol->lambda_prime);
              out.constraint_binding = true;
            } else {
              out.duals.push_back(std::numeric_limits<double>::infinity());
            }
          } catch (const std::domain_error&) {
            // The optimum puts less than the smallest double on some action; return its
            // rounding, pi_k restricted to the argmax set (the lambda' -> max A limit).
            const double top = inst.adv[s].maxCoeff();
            const Eigen::VectorXd limit = (inst.adv[s].array() == top).select(inst.pi_k[s], 0.0);
            out.rows.push_back(CategoricalRow::from_weights(limit).probs());
            out.duals.push_back(top);
            out.constraint_binding = true;
          }
        } else {
          out.rows.push_back(
              solve_backward_kl_on_support(pi_k, inst.adv[s], inst.epsilon).probs());
          out.duals.push_back(std::numeric_limits<double>::quiet_NaN());
          out.constraint_binding = true;
        }
      }
      break;
    }
    case ConstraintKind::linf: {
      const auto lambda = solve_linf_lambda(inst.pi_k[0], inst.adv[0], inst.delta, inst.epsilon);
      const auto sol = solve_linf(inst.pi_k[0], inst.adv[0], lambda, inst.epsilon);
      out.rows.push_back(sol.target_probs);
      out.constraint_binding = std::holds_alternative<LinfBinds>(lambda);
      out.duals.push_back(sol.lambda);
      break;
    }
  }
  out.objective = objective(inst, out.rows);
  return out;
}

namespace {

std::vector<Eigen::VectorXd> rows_from_json(const nlohmann::json& value, const char* key) {
  if (!value.is_array() || value.empty()) {
    throw std::invalid_argument(std::string("instance: '") + key + "' must be a nonempty array");
  }
  auto to_vector = [key](const nlohmann::json& arr) {
    if (!arr.is_array()) {
      throw std::invalid_argument(std::string("instance: '") + key + "' rows must be arrays");
    }
    const auto values = arr.get<std::vector<double>>();
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(values.data(), values.size()));
  };
  if (value.front().is_number()) return {to_vector(value)};
  std::vector<Eigen::VectorXd> rows;
  for (const auto& row : value) rows.push_back(to_vector(row));
  return rows;
}

}  // namespace

nlohmann::json to_json(const ProblemInstance& inst) {
  auto rows = [](const std::vector<Eigen::VectorXd>& in) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : in) out.push_back(std::vector<double>(r.data(), r.data() + r.size()));
    return out;
  };
  nlohmann::json doc{{"constraint", std::string(to_string(inst.kind))},
                     {"pi_k", rows(inst.pi_k)},
                     {"adv", rows(inst.adv)},
                     {"delta", inst.delta},
                     {"epsilon", inst.epsilon}};
  if (inst.kind != ConstraintKind::linf) {
    doc["d"] = std::vector<double>(inst.d.data(), inst.d.data() + inst.d.size());
  }
  return doc;
}

ProblemInstance instance_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("instance: expected a JSON object");
  ProblemInstance inst;
  try {
    if (doc.contains("constraint")) {
      inst.kind = parse_constraint_kind(doc.at("constraint").get<std::string>());
    }
    inst.pi_k = rows_from_json(doc.at("pi_k"), "pi_k");
    inst.adv = rows_from_json(doc.at("adv"), "adv");
    inst.delta = doc.at("delta").get<double>();
    inst.epsilon = doc.at("epsilon").get<double>();
    if (doc.contains("d")) {
      const auto d = doc.at("d").get<std::vector<double>>();
      inst.d = Eigen::Map<const Eigen::VectorXd>(d.data(), d.size());
    } else {
      inst.d = Eigen::VectorXd::Constant(inst.num_states(), 1.0 / inst.num_states());
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("instance: ") + e.what());
  }
  inst.validate();
  return inst;
}

}  // namespace spu::proximal
