#include "spu/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

namespace spu::trainer {

namespace {

constexpr double kStdFloor = 1e-8;
constexpr double kMaxLogProbGap = 30.0;
constexpr std::size_t kReturnWindow = 100;

Matrix single_column(const Vector& v) {
  Matrix m(v.size(), 1);
  m.col(0) = v;
  return m;
}

template <typename T>
T get_field(const nlohmann::json& doc, const char* key, T fallback) {
  if (!doc.contains(key)) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(key, std::string("wrong type (") + e.what() + ")");
  }
}

void require(bool ok, const char* field, const char* message) {
  if (!ok) throw ConfigError(field, message);
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void SpuConfig::validate() const {
  require(std::isfinite(delta) && delta > 0.0, "delta", "must be > 0");
  require(std::isfinite(epsilon) && epsilon > 0.0, "epsilon", "must be > 0");
  require(std::isfinite(lambda) && lambda > 0.0, "lambda", "must be > 0");
  require(zeta >= 1, "zeta", "must be >= 1");
  require(gamma > 0.0 && gamma < 1.0, "gamma", "must be in (0, 1)");
  require(gae_beta >= 0.0 && gae_beta <= 1.0, "gae_beta", "must be in [0, 1]");
  require(std::isfinite(learn_rate) && learn_rate >= 0.0, "learn_rate", "must be >= 0");
  require(minibatch >= 1, "minibatch", "must be >= 1");
  require(steps_per_iter >= 2, "steps_per_iter", "must be >= 2");
  require(iterations >= 0, "iterations", "must be >= 0");
  require(!hidden.empty() && std::all_of(hidden.begin(), hidden.end(), [](int h) { return h > 0; }),
          "hidden", "must be a nonempty list of positive layer widths");
  require(std::isfinite(state_clip) && state_clip >= 0.0, "state_clip", "must be >= 0");
  require(!lambda_prime || std::isfinite(*lambda_prime), "lambda_prime", "must be finite or null");
  try {
    envs::make_env(env);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("env", e.what());
  }
}

nlohmann::json to_json(const SpuConfig& c) {
  return {
      {"env", c.env},
      {"constraint_kind", proximal::to_string(c.constraint_kind)},
      {"delta", c.delta},
      {"epsilon", c.epsilon},
      {"lambda", c.lambda},
      {"zeta", c.zeta},
      {"gamma", c.gamma},
      {"gae_beta", c.gae_beta},
      {"learn_rate", c.learn_rate},
      {"anneal_lr", c.anneal_lr},
      {"minibatch", c.minibatch},
      {"steps_per_iter", c.steps_per_iter},
      {"iterations", c.iterations},
      {"hidden", c.hidden},
      {"normalize_states", c.normalize_states},
      {"state_clip", c.state_clip},
      {"lambda_prime", c.lambda_prime ? nlohmann::json(*c.lambda_prime) : nlohmann::json()},
      {"ablations",
       {{"no_grad_kl", c.ablations.no_grad_kl},
        {"no_dynamic_stopping", c.ablations.no_dynamic_stopping},
        {"no_per_state_acceptance", c.ablations.no_per_state_acceptance}}},
      {"seed", c.seed},
  };
}

SpuConfig config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config", "must be a JSON object");
  static const std::vector<std::string> known{
      "env",        "constraint_kind", "delta",     "epsilon",          "lambda",
      "zeta",       "gamma",           "gae_beta",  "learn_rate",       "anneal_lr",
      "minibatch",  "steps_per_iter",  "iterations", "hidden",          "normalize_states",
      "state_clip", "lambda_prime",    "ablations", "seed"};
  for (const auto& [key, _] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(key, "unknown field");
    }
  }
  SpuConfig c;
  c.env = get_field(doc, "env", c.env);
  if (doc.contains("constraint_kind")) {
    try {
      c.constraint_kind =
          proximal::parse_constraint_kind(get_field<std::string>(doc, "constraint_kind", ""));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("constraint_kind", e.what());
    }
  }
  c.delta = get_field(doc, "delta", c.delta);
  c.epsilon = get_field(doc, "epsilon", c.epsilon);
  c.lambda = get_field(doc, "lambda", c.lambda);
  c.zeta = get_field(doc, "zeta", c.zeta);
  c.gamma = get_field(doc, "gamma", c.gamma);
  c.gae_beta = get_field(doc, "gae_beta", c.gae_beta);
  c.learn_rate = get_field(doc, "learn_rate", c.learn_rate);
  c.anneal_lr = get_field(doc, "anneal_lr", c.anneal_lr);
  c.minibatch = get_field(doc, "minibatch", c.minibatch);
  c.steps_per_iter = get_field(doc, "steps_per_iter", c.steps_per_iter);
  c.iterations = get_field(doc, "iterations", c.iterations);
  c.hidden = get_field(doc, "hidden", c.hidden);
  c.normalize_states = get_field(doc, "normalize_states", c.normalize_states);
  c.state_clip = get_field(doc, "state_clip", c.state_clip);
  if (doc.contains("lambda_prime") && !doc.at("lambda_prime").is_null()) {
    c.lambda_prime = get_field<double>(doc, "lambda_prime", 0.0);
  }
  if (doc.contains("ablations")) {
    const auto& ab = doc.at("ablations");
    if (!ab.is_object()) throw ConfigError("ablations", "must be an object");
    for (const auto& [key, _] : ab.items()) {
      if (key != "no_grad_kl" && key != "no_dynamic_stopping" && key != "no_per_state_acceptance") {
        throw ConfigError("ablations." + key, "unknown ablation");
      }
    }
    c.ablations.no_grad_kl = get_field(ab, "no_grad_kl", false);
    c.ablations.no_dynamic_stopping = get_field(ab, "no_dynamic_stopping", false);
    c.ablations.no_per_state_acceptance = get_field(ab, "no_per_state_acceptance", false);
  }
  c.seed = get_field(doc, "seed", c.seed);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Normalizer

void RunningNormalizer::update(const Vector& x) {
  if (mean_.size() == 0 && count_ == 0) {
    mean_ = Vector::Zero(x.size());
    m2_ = Vector::Zero(x.size());
  }
  if (x.size() != mean_.size()) throw std::invalid_argument("RunningNormalizer: dimension mismatch");
  ++count_;
  const Vector diff = x - mean_;
  mean_ += diff / static_cast<double>(count_);
  m2_ += diff.cwiseProduct(x - mean_);
}

void RunningNormalizer::update_columns(const Matrix& columns) {
  for (Eigen::Index i = 0; i < columns.cols(); ++i) update(Vector(columns.col(i)));
}

Vector RunningNormalizer::variance() const {
  if (count_ == 0) return Vector::Zero(mean_.size());
  return (m2_ / static_cast<double>(count_)).cwiseMax(0.0);
}

Vector RunningNormalizer::apply(const Vector& x, double clip) const {
  if (count_ == 0) return x;
  if (x.size() != mean_.size()) throw std::invalid_argument("RunningNormalizer: dimension mismatch");
  Vector out = (x - mean_).cwiseQuotient(variance().cwiseSqrt().cwiseMax(kStdFloor));
  if (clip > 0.0) out = out.cwiseMax(-clip).cwiseMin(clip);
  return out;
}

Matrix RunningNormalizer::apply_columns(const Matrix& columns, double clip) const {
  if (count_ == 0) return columns;
  if (columns.rows() != mean_.size()) {
    throw std::invalid_argument("RunningNormalizer: dimension mismatch");
  }
  const Vector inv_std = variance().cwiseSqrt().cwiseMax(kStdFloor).cwiseInverse();
  Matrix out = inv_std.asDiagonal() * (columns.colwise() - mean_);
  if (clip > 0.0) out = out.cwiseMax(-clip).cwiseMin(clip);
  return out;
}

// ---------------------------------------------------------------------------
// Advantages

void compute_gae(RolloutBatch& batch, double gamma, double gae_beta) {
  const Eigen::Index n = batch.size();
  if (batch.values.size() != n || static_cast<Eigen::Index>(batch.terminated.size()) != n ||
      static_cast<Eigen::Index>(batch.truncated.size()) != n ||
      static_cast<Eigen::Index>(batch.bootstrap.size()) != n) {
    throw std::invalid_argument("compute_gae: batch fields have inconsistent lengths");
  }
  batch.advantages.resize(n);
  double next_advantage = 0.0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const bool segment_end = batch.truncated[t] || t == n - 1;
    double next_value = 0.0;
    if (!batch.terminated[t]) {
      if (segment_end) {
        if (!batch.bootstrap[t]) {
          throw std::invalid_argument("compute_gae: missing bootstrap value at step " +
                                      std::to_string(t));
        }
        next_value = *batch.bootstrap[t];
      } else {
        next_value = batch.values(t + 1);
      }
    }
    const double td = batch.rewards(t) + gamma * next_value - batch.values(t);
    const bool continues = !batch.terminated[t] && !segment_end;
    next_advantage = td + (continues ? gamma * gae_beta * next_advantage : 0.0);
    batch.advantages(t) = next_advantage;
  }
  batch.value_targets = batch.advantages + batch.values;
}

Vector normalize_advantages(const Vector& advantages) {
  if (advantages.size() == 0) return advantages;
  const double mean = advantages.mean();
  const Vector centered = advantages.array() - mean;
  const double std = std::sqrt(centered.squaredNorm() / static_cast<double>(advantages.size()));
  if (std < kStdFloor) return Vector::Zero(advantages.size());
  return centered / std;
}

// ---------------------------------------------------------------------------
// Update gradients

Minibatch make_minibatch(const RolloutBatch& batch, const nn::PolicyOutput& old_full,
                         const Vector& linf_targets, std::span<const Eigen::Index> indices) {
  const auto m = static_cast<Eigen::Index>(indices.size());
  Minibatch mb;
  mb.states.resize(batch.states.rows(), m);
  mb.advantages.resize(m);
  mb.old_log_probs.resize(m);
  mb.old_output.kind = old_full.kind;
  mb.old_output.head.resize(old_full.head.rows(), m);
  mb.old_output.log_std = old_full.log_std;
  const bool categorical = old_full.kind == nn::HeadKind::categorical;
  if (categorical) {
    mb.old_output.log_probs.resize(old_full.log_probs.rows(), m);
    mb.actions.indices.resize(indices.size());
  } else {
    mb.actions.values.resize(batch.actions.values.rows(), m);
  }
  if (linf_targets.size() > 0) mb.linf_targets.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::Index i = indices[j];
    mb.states.col(j) = batch.states.col(i);
    mb.advantages(j) = batch.advantages(i);
    mb.old_log_probs(j) = batch.log_probs(i);
    mb.old_output.head.col(j) = old_full.head.col(i);
    if (categorical) {
      mb.old_output.log_probs.col(j) = old_full.log_probs.col(i);
      mb.actions.indices[j] = batch.actions.indices[i];
    } else {
      mb.actions.values.col(j) = batch.actions.values.col(i);
    }
    if (linf_targets.size() > 0) mb.linf_targets(j) = linf_targets(i);
  }
  return mb;
}

UpdateGradient forward_kl_update_gradient(const nn::PolicyNet& theta, const Minibatch& mb,
                                          const ForwardKlOptions& options) {
  const Eigen::Index m = mb.size();
  if (options.frozen_indicator && static_cast<Eigen::Index>(options.frozen_indicator->size()) != m) {
    throw std::invalid_argument("forward_kl_update_gradient: indicator length mismatch");
  }
  const nn::PolicyOutput out = theta.forward(mb.states);
  UpdateGradient result;
  result.kl = nn::kl(out, mb.old_output);
  const Vector gap = nn::log_prob(out, mb.actions) - mb.old_log_probs;

  Vector kl_weight = Vector::Zero(m);
  Vector ratio_weight = Vector::Zero(m);
  const double scale = 1.0 / static_cast<double>(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const bool over = result.kl(i) > options.epsilon;
    if (over) ++result.over_epsilon;
    if (std::abs(gap(i)) > kMaxLogProbGap) {
      ++result.excluded;
      continue;
    }
    bool accept = !over || !options.per_state_acceptance;
    if (options.frozen_indicator) accept = (*options.frozen_indicator)[i] != 0;
    if (!accept) continue;
    ++result.accepted;
    if (over) ++result.accepted_over_epsilon;
    const double ratio = std::exp(gap(i));
    const double surrogate = ratio * mb.advantages(i) / options.lambda;
    result.loss += scale * ((options.grad_kl ? result.kl(i) : 0.0) - surrogate);
    if (options.grad_kl) kl_weight(i) = scale;
    ratio_weight(i) = -scale * surrogate;
  }

  nn::HeadGrad upstream = nn::d_log_prob(out, mb.actions);
  upstream.scale_columns(ratio_weight);
  if (options.grad_kl) {
    nn::HeadGrad kl_part = nn::d_kl(out, mb.old_output);
    kl_part.scale_columns(kl_weight);
    upstream += kl_part;
  }
  result.grad = theta.backward(out, upstream);
  return result;
}

UpdateGradient backward_kl_update_gradient(const nn::PolicyNet& theta, const Minibatch& mb,
                                           double lambda_prime, double epsilon, bool grad_kl) {
  const Eigen::Index m = mb.size();
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(lambda_prime > mb.advantages(i))) {
      throw std::domain_error("backward_kl_update_gradient: lambda' must exceed every advantage");
    }
  }
  const nn::PolicyOutput out = theta.forward(mb.states);
  UpdateGradient result;
  result.kl = nn::kl(out, mb.old_output);
  const Vector gap = nn::log_prob(out, mb.actions) - mb.old_log_probs;
  const double scale = 1.0 / static_cast<double>(m);

  Vector ratio_weight = Vector::Zero(m);
  Vector kl_weight = Vector::Zero(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (result.kl(i) > epsilon) ++result.over_epsilon;
    if (std::abs(gap(i)) > kMaxLogProbGap) {
      ++result.excluded;
      continue;
    }
    ++result.accepted;
    const double ratio = std::exp(gap(i));
    const double log_term = std::log(lambda_prime - mb.advantages(i));
    result.loss += scale * ((grad_kl ? result.kl(i) : 0.0) + ratio * log_term);
    ratio_weight(i) = scale * ratio * log_term;
    if (grad_kl) kl_weight(i) = scale;
  }
  nn::HeadGrad upstream = nn::d_log_prob(out, mb.actions);
  upstream.scale_columns(ratio_weight);
  if (grad_kl) {
    nn::HeadGrad kl_part = nn::d_kl(out, mb.old_output);
    kl_part.scale_columns(kl_weight);
    upstream += kl_part;
  }
  result.grad = theta.backward(out, upstream);
  return result;
}

UpdateGradient linf_update_gradient(const nn::PolicyNet& theta, const Minibatch& mb,
                                    double epsilon) {
  const Eigen::Index m = mb.size();
  if (mb.linf_targets.size() != m) {
    throw std::invalid_argument("linf_update_gradient: minibatch has no targets");
  }
  const nn::PolicyOutput out = theta.forward(mb.states);
  UpdateGradient result;
  result.kl = nn::kl(out, mb.old_output);
  const Vector prob = nn::log_prob(out, mb.actions).array().exp();
  const Vector residual = prob - mb.linf_targets;
  const double scale = 1.0 / static_cast<double>(m);
  result.loss = scale * residual.squaredNorm();
  result.accepted = static_cast<int>(m);
  result.over_epsilon = static_cast<int>((result.kl.array() > epsilon).count());

  nn::HeadGrad upstream = nn::d_log_prob(out, mb.actions);
  upstream.scale_columns(2.0 * scale * residual.cwiseProduct(prob));
  result.grad = theta.backward(out, upstream);
  return result;
}

Vector linf_targets(const Vector& old_log_probs, const Vector& advantages, double lambda,
                    double epsilon) {
  return proximal::solve_linf(old_log_probs.array().exp().matrix(), advantages, lambda, epsilon)
      .target_probs;
}

double fit_critic(nn::ValueNet& critic, nn::AdamState& adam, const Matrix& states,
                  const Vector& targets, double lr_multiplier) {
  Vector grad;
  const double loss = critic.mse_loss(states, targets, &grad);
  if (!std::isfinite(loss)) throw std::runtime_error("fit_critic: critic loss is not finite");
  Vector params = critic.parameters();
  nn::adam_step(params, grad, adam, lr_multiplier);
  critic.set_parameters(params);
  return loss;
}

// ---------------------------------------------------------------------------
// Metrics

std::string csv_header() {
  return "iter,steps,mean_return_100,mean_kl_stop,epochs_used,reject_frac,critic_loss,lr";
}

std::string csv_row(const IterationMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%ld,%.10g,%.10g,%d,%.10g,%.10g,%.10g", m.iteration, m.steps,
                m.mean_return_100, m.mean_kl_stop, m.epochs_used, m.reject_frac, m.critic_loss,
                m.lr);
  return buf;
}

// ---------------------------------------------------------------------------
// Trainer

namespace {

nn::HeadKind head_for(const envs::ActionSpace& space) {
  return space.discrete() ? nn::HeadKind::categorical : nn::HeadKind::gaussian;
}

std::unique_ptr<envs::Env> validated_env(const SpuConfig& config) {
  config.validate();
  return envs::make_env(config.env);
}

}  // namespace

Trainer::Trainer(SpuConfig config) : Trainer(config, validated_env(config)) {}

Trainer::Trainer(SpuConfig config, std::unique_ptr<envs::Env> env)
    : config_(std::move(config)),
      env_(std::move(env)),
      rng_(config_.seed),
      policy_(head_for(env_->action_space()), env_->state_dim(), env_->action_space().head_dim(),
              config_.hidden),
      previous_(policy_),
      critic_(env_->state_dim(), config_.hidden) {
  config_.validate();
  policy_.init(rng_);
  critic_.init(rng_);
  previous_ = policy_;
  policy_adam_ = nn::AdamState(policy_.num_params(), config_.learn_rate);
  critic_adam_ = nn::AdamState(critic_.num_params(), config_.learn_rate);
  normalizer_ = RunningNormalizer(env_->state_dim());
}

double Trainer::lr_multiplier() const {
  if (!config_.anneal_lr || config_.iterations <= 0) return 1.0;
  return std::max(0.0, 1.0 - static_cast<double>(iteration_) / config_.iterations);
}

Vector Trainer::normalized(const Vector& raw) const {
  if (!config_.normalize_states) return raw;
  return normalizer_.apply(raw, config_.state_clip);
}

RolloutBatch Trainer::collect() {
  const Eigen::Index n = config_.steps_per_iter;
  const int dim = env_->state_dim();
  const bool categorical = policy_.kind() == nn::HeadKind::categorical;

  RolloutBatch batch;
  batch.states.resize(dim, n);
  if (categorical) {
    batch.actions.indices.resize(n);
  } else {
    batch.actions.values.resize(policy_.action_dim(), n);
  }
  batch.rewards.resize(n);
  batch.log_probs.resize(n);
  batch.values.resize(n);
  batch.terminated.assign(n, 0);
  batch.truncated.assign(n, 0);
  batch.bootstrap.assign(n, std::nullopt);
  Matrix raw_states(dim, n);

  for (Eigen::Index t = 0; t < n; ++t) {
    if (need_reset_) {
      raw_state_ = env_->reset(rng_());
      need_reset_ = false;
      episode_return_ = 0.0;
    }
    raw_states.col(t) = raw_state_;
    const Matrix state = single_column(normalized(raw_state_));
    batch.states.col(t) = state.col(0);

    const nn::PolicyOutput out = policy_.forward(state);
    const nn::Action action = nn::sample_action(out, 0, rng_);
    batch.log_probs(t) = nn::log_prob(out, nn::ActionBatch::single(action))(0);
    batch.values(t) = critic_.values(state)(0);
    if (categorical) {
      batch.actions.indices[t] = action.index;
    } else {
      batch.actions.values.col(t) = action.value;
    }

    const envs::StepResult step = env_->step(action);
    batch.rewards(t) = step.reward;
    batch.terminated[t] = step.terminated;
    batch.truncated[t] = step.truncated;
    episode_return_ += step.reward;
    if (!step.terminated && (step.truncated || t == n - 1)) {
      batch.bootstrap[t] = critic_.value(normalized(step.state));
    }
    if (step.done()) {
      recent_returns_.push_back(episode_return_);
      if (recent_returns_.size() > kReturnWindow) recent_returns_.pop_front();
      ++episodes_completed_;
      need_reset_ = true;
    }
    raw_state_ = step.state;
  }
  if (config_.normalize_states) normalizer_.update_columns(raw_states);
  total_steps_ += n;
  return batch;
}

IterationMetrics Trainer::train_iteration() {
  const auto start = std::chrono::steady_clock::now();
  const double lr_mult = lr_multiplier();

  RolloutBatch batch = collect();
  compute_gae(batch, config_.gamma, config_.gae_beta);
  const Vector value_targets = batch.value_targets;
  batch.advantages = normalize_advantages(batch.advantages);

  previous_ = policy_;
  nn::PolicyOutput old_full = previous_.forward(batch.states);
  old_full.cache.activations.clear();
  batch.log_probs = nn::log_prob(old_full, batch.actions);

  const auto kind = config_.constraint_kind;
  const double lambda_prime =
      config_.lambda_prime.value_or(batch.advantages.maxCoeff() + 1.0);
  Vector targets;
  if (kind == proximal::ConstraintKind::linf) {
    targets = linf_targets(batch.log_probs, batch.advantages, config_.lambda, config_.epsilon);
  }
  ForwardKlOptions fkl;
  fkl.lambda = config_.lambda;
  fkl.epsilon = config_.epsilon;
  fkl.grad_kl = !config_.ablations.no_grad_kl;
  fkl.per_state_acceptance = !config_.ablations.no_per_state_acceptance;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(batch.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  IterationMetrics metrics;
  metrics.iteration = iteration_;
  metrics.lr = config_.learn_rate * lr_mult;
  long sample_uses = 0;
  long over_epsilon = 0;
  double critic_loss_sum = 0.0;
  long critic_steps = 0;

  for (int epoch = 1; epoch <= config_.zeta; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng_);
    for (std::size_t begin = 0; begin < order.size(); begin += config_.minibatch) {
      const std::size_t end = std::min(order.size(), begin + config_.minibatch);
      const std::span<const Eigen::Index> idx(order.data() + begin, end - begin);
      const Minibatch mb = make_minibatch(batch, old_full, targets, idx);

      Vector mb_targets(mb.size());
      for (Eigen::Index j = 0; j < mb.size(); ++j) mb_targets(j) = value_targets(idx[j]);
      critic_loss_sum += fit_critic(critic_, critic_adam_, mb.states, mb_targets, lr_mult);
      ++critic_steps;

      UpdateGradient update;
      switch (kind) {
        case proximal::ConstraintKind::forward_kl:
          update = forward_kl_update_gradient(policy_, mb, fkl);
          break;
        case proximal::ConstraintKind::backward_kl:
          update = backward_kl_update_gradient(policy_, mb, lambda_prime, config_.epsilon,
                                               fkl.grad_kl);
          break;
        case proximal::ConstraintKind::linf:
          update = linf_update_gradient(policy_, mb, config_.epsilon);
          break;
      }
      sample_uses += mb.size();
      over_epsilon += update.over_epsilon;
      metrics.excluded_samples += update.excluded;
      metrics.accepted_over_epsilon += update.accepted_over_epsilon;

      Vector params = policy_.parameters();
      nn::adam_step(params, update.grad, policy_adam_, lr_mult);
      policy_.set_parameters(params);
    }
    metrics.epochs_used = epoch;
    metrics.mean_kl_stop = nn::kl(policy_.forward(batch.states), old_full).mean();
    if (!config_.ablations.no_dynamic_stopping && metrics.mean_kl_stop > config_.delta) break;
  }

  ++iteration_;
  metrics.steps = total_steps_;
  metrics.reject_frac =
      sample_uses > 0 ? static_cast<double>(over_epsilon) / static_cast<double>(sample_uses) : 0.0;
  metrics.critic_loss = critic_steps > 0 ? critic_loss_sum / critic_steps : 0.0;
  metrics.episodes_completed = episodes_completed_;
  metrics.mean_return_100 =
      recent_returns_.empty()
          ? std::numeric_limits<double>::quiet_NaN()
          : std::accumulate(recent_returns_.begin(), recent_returns_.end(), 0.0) /
                static_cast<double>(recent_returns_.size());
  metrics.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return metrics;
}

std::vector<IterationMetrics> run(Trainer& trainer, std::ostream* csv) {
  std::vector<IterationMetrics> history;
  if (csv) *csv << csv_header() << '\n';
  for (int i = 0; i < trainer.config().iterations; ++i) {
    history.push_back(trainer.train_iteration());
    if (csv) *csv << csv_row(history.back()) << '\n' << std::flush;
  }
  return history;
}

}  // namespace spu::trainer
