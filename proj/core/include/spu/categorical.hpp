#pragma once

#include <Eigen/Dense>

#include <initializer_list>
#include <stdexcept>

namespace spu {

/// Thrown when a distribution puts mass on an action its reference cannot take.
class SupportError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Probability distribution over a finite action set. Validated on construction.
class CategoricalRow {
 public:
  static constexpr double kTolerance = 1e-10;

  /// Throws std::invalid_argument unless probs is nonnegative and sums to 1.
  explicit CategoricalRow(Eigen::VectorXd probs);
  CategoricalRow(std::initializer_list<double> probs);

  /// Normalizes nonnegative weights; throws if they sum to zero.
  static CategoricalRow from_weights(const Eigen::VectorXd& weights);
  static CategoricalRow uniform(int size);

  const Eigen::VectorXd& probs() const { return probs_; }
  int size() const { return static_cast<int>(probs_.size()); }
  double operator[](int a) const { return probs_(a); }

 private:
  Eigen::VectorXd probs_;
};

/// KL(p || q) with 0 log 0 = 0. Throws SupportError when p(a) > 0 = q(a).
double kl_categorical(const Eigen::VectorXd& p, const Eigen::VectorXd& q);
inline double kl_categorical(const CategoricalRow& p, const CategoricalRow& q) {
  return kl_categorical(p.probs(), q.probs());
}

}  // namespace spu
