#include "spu/categorical.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace spu {

CategoricalRow::CategoricalRow(Eigen::VectorXd probs) : probs_(std::move(probs)) {
  if (probs_.size() == 0) throw std::invalid_argument("CategoricalRow: empty distribution");
  for (Eigen::Index a = 0; a < probs_.size(); ++a) {
    if (!std::isfinite(probs_(a)) || probs_(a) < 0.0) {
      throw std::invalid_argument("CategoricalRow: negative or non-finite entry at " +
                                  std::to_string(a));
    }
  }
  if (std::abs(probs_.sum() - 1.0) > kTolerance) {
    throw std::invalid_argument("CategoricalRow: probabilities sum to " +
                                std::to_string(probs_.sum()));
  }
}

CategoricalRow::CategoricalRow(std::initializer_list<double> probs)
    : CategoricalRow(Eigen::Map<const Eigen::VectorXd>(probs.begin(),
                                                       static_cast<Eigen::Index>(probs.size()))) {}

CategoricalRow CategoricalRow::from_weights(const Eigen::VectorXd& weights) {
  const double total = weights.sum();
  if (!(total > 0.0)) throw std::invalid_argument("CategoricalRow: weights sum to zero");
  return CategoricalRow(weights / total);
}

CategoricalRow CategoricalRow::uniform(int size) {
  return CategoricalRow(Eigen::VectorXd::Constant(size, 1.0 / size));
}

double kl_categorical(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_categorical: size mismatch");
  double kl = 0.0;
  for (Eigen::Index a = 0; a < p.size(); ++a) {
    if (p(a) <= 0.0) continue;
    if (q(a) <= 0.0) {
      throw SupportError("kl_categorical: p has mass on action " + std::to_string(a) +
                         " where q is zero");
    }
    kl += p(a) * std::log(p(a) / q(a));
  }
  return std::max(kl, 0.0);
}

}  // namespace spu
