#pragma once

#include "spu/proximal_solver.hpp"

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace spu::proximal {

/// Raised when the oracle cannot find or keep a strictly feasible point.
class OracleFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OracleOptions {
  /// Random strictly feasible starting points in addition to pi_k itself.
  int restarts = 10;
  std::uint64_t seed = 0;
  /// Stop when the barrier duality-gap bound m / t falls below this.
  double gap_tolerance = 1e-10;
  int max_newton_steps = 200;
};

struct OracleResult {
  std::vector<Eigen::VectorXd> rows;
  double objective = 0.0;
  /// Largest constraint violation of the returned point (0 when strictly feasible).
  double max_violation = 0.0;
  int newton_steps = 0;
};

/**
 * Solves the same convex program as the closed forms with a generic
 * log-barrier interior-point method (Newton steps with the per-state
 * simplex equalities in the KKT system), started from pi_k and from
 * random strictly feasible points. Returns the best feasible point.
 *
 * It never uses the tilt, the lambda' family or the clipping formula, so
 * it is an independent check on all three closed forms.
 */
OracleResult brute_force_oracle(const ProblemInstance& inst, const OracleOptions& options = {});

/// Random instance: Dirichlet(1) pi_k rows, N(0, 1) advantages, Dirichlet(1) d.
ProblemInstance random_instance(ConstraintKind kind, std::mt19937_64& rng, int num_states,
                                int num_actions, double delta, double epsilon);

}  // namespace spu::proximal
