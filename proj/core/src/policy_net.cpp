#include "spu/policy_net.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace spu::nn {

namespace {

Matrix log_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index m = 0; m < logits.cols(); ++m) {
    const double top = logits.col(m).maxCoeff();
    const double lse = top + std::log((logits.col(m).array() - top).exp().sum());
    out.col(m) = logits.col(m).array() - lse;
  }
  return out;
}

void check_actions(const PolicyOutput& out, const ActionBatch& actions) {
  if (actions.size() != out.batch_size()) {
    throw std::invalid_argument("action batch size does not match state batch size");
  }
  if (out.kind == HeadKind::categorical) {
    if (actions.indices.size() != static_cast<std::size_t>(out.batch_size())) {
      throw std::invalid_argument("categorical head needs action indices");
    }
    for (int a : actions.indices) {
      if (a < 0 || a >= out.head.rows()) {
        throw std::out_of_range("action index " + std::to_string(a) + " out of range [0, " +
                                std::to_string(out.head.rows()) + ")");
      }
    }
  } else if (actions.values.rows() != out.head.rows()) {
    throw std::invalid_argument("gaussian head needs action vectors of the head dimension");
  }
}

void check_pair(const PolicyOutput& p, const PolicyOutput& q) {
  if (p.kind != q.kind) throw std::invalid_argument("kl: head kinds differ");
  if (p.head.rows() != q.head.rows() || p.head.cols() != q.head.cols()) {
    throw std::invalid_argument("kl: output shapes differ");
  }
}

Matrix single_column(const Vector& v) {
  Matrix m(v.size(), 1);
  m.col(0) = v;
  return m;
}

}  // namespace

std::string_view to_string(HeadKind kind) {
  return kind == HeadKind::categorical ? "categorical" : "gaussian";
}

HeadKind parse_head_kind(std::string_view name) {
  if (name == "categorical") return HeadKind::categorical;
  if (name == "gaussian") return HeadKind::gaussian;
  throw std::invalid_argument("unknown head kind '" + std::string(name) + "'");
}

ActionBatch ActionBatch::single(const Action& action) {
  ActionBatch batch;
  if (action.index >= 0) {
    batch.indices = {action.index};
  } else {
    batch.values = single_column(action.value);
  }
  return batch;
}

void HeadGrad::scale_columns(const Vector& weights) {
  d_head = d_head * weights.asDiagonal();
  if (d_log_std.size() > 0) d_log_std = d_log_std * weights.asDiagonal();
}

HeadGrad& HeadGrad::operator+=(const HeadGrad& other) {
  d_head += other.d_head;
  if (other.d_log_std.size() > 0) {
    if (d_log_std.size() == 0) {
      d_log_std = other.d_log_std;
    } else {
      d_log_std += other.d_log_std;
    }
  }
  return *this;
}

Action sample_action(const PolicyOutput& out, Eigen::Index m, std::mt19937_64& rng) {
  if (out.kind == HeadKind::categorical) {
    const Vector probs = out.log_probs.col(m).array().exp();
    std::discrete_distribution<int> dist(probs.data(), probs.data() + probs.size());
    return Action::discrete(dist(rng));
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector value(out.head.rows());
  for (Eigen::Index i = 0; i < value.size(); ++i) {
    value(i) = out.head(i, m) + std::exp(out.log_std(i)) * normal(rng);
  }
  return Action::continuous(std::move(value));
}

Vector log_prob(const PolicyOutput& out, const ActionBatch& actions) {
  check_actions(out, actions);
  const Eigen::Index batch = out.batch_size();
  Vector result(batch);
  if (out.kind == HeadKind::categorical) {
    for (Eigen::Index m = 0; m < batch; ++m) result(m) = out.log_probs(actions.indices[m], m);
    return result;
  }
  const Eigen::ArrayXd inv_var = (-2.0 * out.log_std.array()).exp();
  const double log_norm =
      out.log_std.sum() + 0.5 * static_cast<double>(out.log_std.size()) *
                              std::log(2.0 * std::numbers::pi);
  for (Eigen::Index m = 0; m < batch; ++m) {
    const Eigen::ArrayXd diff = actions.values.col(m).array() - out.head.col(m).array();
    result(m) = -0.5 * (diff.square() * inv_var).sum() - log_norm;
  }
  return result;
}

HeadGrad d_log_prob(const PolicyOutput& out, const ActionBatch& actions) {
  check_actions(out, actions);
  HeadGrad grad;
  if (out.kind == HeadKind::categorical) {
    grad.d_head = -out.probs();
    for (Eigen::Index m = 0; m < out.batch_size(); ++m) grad.d_head(actions.indices[m], m) += 1.0;
    return grad;
  }
  const Vector inv_var = (-2.0 * out.log_std.array()).exp();
  const Matrix diff = actions.values - out.head;
  grad.d_head = inv_var.asDiagonal() * diff;
  grad.d_log_std = (inv_var.asDiagonal() * diff.cwiseAbs2()).array() - 1.0;
  return grad;
}

Vector kl(const PolicyOutput& p, const PolicyOutput& q) {
  check_pair(p, q);
  const Eigen::Index batch = p.batch_size();
  Vector result(batch);
  if (p.kind == HeadKind::categorical) {
    const Matrix probs = p.probs();
    for (Eigen::Index m = 0; m < batch; ++m) {
      const double value =
          (probs.col(m).array() * (p.log_probs.col(m) - q.log_probs.col(m)).array()).sum();
      result(m) = std::max(value, 0.0);
    }
    return result;
  }
  const Eigen::ArrayXd var_ratio = (2.0 * (p.log_std - q.log_std).array()).exp();
  const Eigen::ArrayXd inv_var_q = (-2.0 * q.log_std.array()).exp();
  const double constant = (q.log_std - p.log_std).sum() + 0.5 * var_ratio.sum() -
                          0.5 * static_cast<double>(p.log_std.size());
  for (Eigen::Index m = 0; m < batch; ++m) {
    const Eigen::ArrayXd diff = p.head.col(m).array() - q.head.col(m).array();
    result(m) = std::max(constant + 0.5 * (diff.square() * inv_var_q).sum(), 0.0);
  }
  return result;
}

HeadGrad d_kl(const PolicyOutput& p, const PolicyOutput& q) {
  check_pair(p, q);
  HeadGrad grad;
  if (p.kind == HeadKind::categorical) {
    const Matrix probs = p.probs();
    Matrix gap = p.log_probs - q.log_probs;
    const Eigen::RowVectorXd value = (probs.array() * gap.array()).colwise().sum();
    gap.rowwise() -= value;
    grad.d_head = probs.cwiseProduct(gap);
    return grad;
  }
  const Vector inv_var_q = (-2.0 * q.log_std.array()).exp();
  grad.d_head = inv_var_q.asDiagonal() * (p.head - q.head);
  const Vector per_dim = (2.0 * (p.log_std - q.log_std).array()).exp() - 1.0;
  grad.d_log_std = per_dim.replicate(1, p.batch_size());
  return grad;
}

PolicyNet::PolicyNet(HeadKind kind, int state_dim, int action_dim, std::vector<int> hidden)
    : kind_(kind), action_dim_(action_dim) {
  if (state_dim <= 0 || action_dim <= 0) {
    throw std::invalid_argument("PolicyNet: state and action dimensions must be positive");
  }
  std::vector<int> sizes{state_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(action_dim);
  trunk_ = Mlp(std::move(sizes));
  log_std_ = kind == HeadKind::gaussian ? Vector::Zero(action_dim) : Vector();
}

void PolicyNet::init(std::mt19937_64& rng) {
  trunk_.init(rng, 1.0, 0.01);
  log_std_.setZero();
}

Vector PolicyNet::parameters() const {
  Vector out(num_params());
  out.head(trunk_.num_params()) = trunk_.params();
  out.tail(log_std_.size()) = log_std_;
  return out;
}

void PolicyNet::set_parameters(const Vector& params) {
  if (params.size() != num_params()) {
    throw std::invalid_argument("PolicyNet::set_parameters: expected " +
                                std::to_string(num_params()) + " parameters, got " +
                                std::to_string(params.size()));
  }
  trunk_.set_params(params.head(trunk_.num_params()));
  log_std_ = params.tail(log_std_.size());
}

PolicyOutput PolicyNet::forward(const Matrix& states) const {
  PolicyOutput out;
  out.kind = kind_;
  out.head = trunk_.forward(states, &out.cache);
  if (kind_ == HeadKind::categorical) {
    out.log_probs = log_softmax(out.head);
  } else {
    out.log_std = log_std_;
  }
  return out;
}

Vector PolicyNet::backward(const PolicyOutput& out, const HeadGrad& upstream) const {
  Vector grad = Vector::Zero(num_params());
  trunk_.backward(out.cache, upstream.d_head, grad.head(trunk_.num_params()));
  if (kind_ == HeadKind::gaussian && upstream.d_log_std.size() > 0) {
    grad.tail(log_std_.size()) = upstream.d_log_std.rowwise().sum();
  }
  return grad;
}

Action PolicyNet::sample(const Vector& state, std::mt19937_64& rng) const {
  return sample_action(forward(single_column(state)), 0, rng);
}

double PolicyNet::log_prob(const Vector& state, const Action& action) const {
  return nn::log_prob(forward(single_column(state)), ActionBatch::single(action))(0);
}

Vector PolicyNet::grad_log_prob(const Vector& state, const Action& action) const {
  const PolicyOutput out = forward(single_column(state));
  return backward(out, d_log_prob(out, ActionBatch::single(action)));
}

double kl_between(const PolicyNet& theta, const PolicyNet& theta_k, const Vector& state) {
  if (theta.kind() != theta_k.kind() || theta.action_dim() != theta_k.action_dim()) {
    throw std::invalid_argument("kl_between: policies have different heads");
  }
  const Matrix s = single_column(state);
  return kl(theta.forward(s), theta_k.forward(s))(0);
}

Vector grad_kl_between(const PolicyNet& theta, const PolicyNet& theta_k, const Vector& state) {
  if (theta.kind() != theta_k.kind() || theta.action_dim() != theta_k.action_dim()) {
    throw std::invalid_argument("kl_between: policies have different heads");
  }
  const Matrix s = single_column(state);
  const PolicyOutput p = theta.forward(s);
  return theta.backward(p, d_kl(p, theta_k.forward(s)));
}

ValueNet::ValueNet(int state_dim, std::vector<int> hidden) {
  if (state_dim <= 0) throw std::invalid_argument("ValueNet: state dimension must be positive");
  std::vector<int> sizes{state_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  trunk_ = Mlp(std::move(sizes));
}

void ValueNet::init(std::mt19937_64& rng) { trunk_.init(rng, 1.0, 1.0); }

Vector ValueNet::values(const Matrix& states) const { return trunk_.forward(states).row(0); }

double ValueNet::value(const Vector& state) const { return values(single_column(state))(0); }

double ValueNet::mse_loss(const Matrix& states, const Vector& targets, Vector* grad) const {
  if (targets.size() != states.cols()) {
    throw std::invalid_argument("ValueNet::mse_loss: target count does not match batch size");
  }
  Mlp::Cache cache;
  const Matrix out = trunk_.forward(states, grad ? &cache : nullptr);
  const Eigen::RowVectorXd residual = out.row(0) - targets.transpose();
  const double batch = static_cast<double>(targets.size());
  if (grad) {
    grad->setZero(num_params());
    trunk_.backward(cache, (2.0 / batch) * residual, *grad);
  }
  return residual.squaredNorm() / batch;
}

}  // namespace spu::nn
