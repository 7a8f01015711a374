#include "spu/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace spu::nn {

namespace {

// tanh via a packet-vectorized exp; libm's scalar tanh dominated training time.
void tanh_in_place(Matrix& m) {
  auto a = m.array();
  const Eigen::ArrayXXd t = (-2.0 * a.abs()).exp();
  a = a.sign() * (1.0 - t) / (1.0 + t);
}

}  // namespace

Mlp::Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("Mlp: need input and output sizes");
  Eigen::Index total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] <= 0 || sizes_[l + 1] <= 0) {
      throw std::invalid_argument("Mlp: layer sizes must be positive");
    }
    offsets_.push_back(total);
    total += static_cast<Eigen::Index>(sizes_[l] + 1) * sizes_[l + 1];
  }
  params_ = Vector::Zero(total);
}

void Mlp::set_params(const Vector& params) {
  if (params.size() != params_.size()) {
    throw std::invalid_argument("Mlp::set_params: expected " + std::to_string(params_.size()) +
                                " parameters, got " + std::to_string(params.size()));
  }
  params_ = params;
}

void Mlp::init(std::mt19937_64& rng, double hidden_gain, double output_gain) {
  for (int l = 0; l < num_layers(); ++l) {
    const int fan_in = sizes_[l];
    const int fan_out = sizes_[l + 1];
    const double gain = l + 1 == num_layers() ? output_gain : hidden_gain;
    const double limit = gain * std::sqrt(3.0 / fan_in);
    std::uniform_real_distribution<double> dist(-limit, limit);
    const Eigen::Index n_weights = static_cast<Eigen::Index>(fan_in) * fan_out;
    for (Eigen::Index i = 0; i < n_weights; ++i) params_(offsets_[l] + i) = dist(rng);
    params_.segment(offsets_[l] + n_weights, fan_out).setZero();
  }
}

Eigen::Map<const Matrix> Mlp::weight(int layer) const {
  return {params_.data() + offsets_[layer], sizes_[layer + 1], sizes_[layer]};
}

Eigen::Map<const Vector> Mlp::bias(int layer) const {
  return {params_.data() + offsets_[layer] + static_cast<Eigen::Index>(sizes_[layer]) *
                                                 sizes_[layer + 1],
          sizes_[layer + 1]};
}

Matrix Mlp::forward(const Matrix& inputs, Cache* cache) const {
  if (inputs.rows() != input_dim()) {
    throw std::invalid_argument("Mlp::forward: input dimension " + std::to_string(inputs.rows()) +
                                " != " + std::to_string(input_dim()));
  }
  if (cache) {
    cache->activations.resize(sizes_.size());
    cache->activations[0] = inputs;
  }
  Matrix current = inputs;
  for (int l = 0; l < num_layers(); ++l) {
    Matrix next = weight(l) * current;
    next.colwise() += bias(l);
    if (l + 1 < num_layers()) tanh_in_place(next);
    current = std::move(next);
    if (cache) cache->activations[l + 1] = current;
  }
  return current;
}

void Mlp::backward(const Cache& cache, const Matrix& d_output, Eigen::Ref<Vector> grad) const {
  if (grad.size() < num_params()) throw std::invalid_argument("Mlp::backward: gradient too short");
  if (d_output.rows() != output_dim() || d_output.cols() != cache.activations.front().cols()) {
    throw std::invalid_argument("Mlp::backward: upstream gradient has wrong shape");
  }
  Matrix delta = d_output;
  for (int l = num_layers() - 1; l >= 0; --l) {
    const Matrix& input = cache.activations[l];
    const Eigen::Index n_weights = static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1];
    Eigen::Map<Matrix> d_weight(grad.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
    d_weight.noalias() += delta * input.transpose();
    grad.segment(offsets_[l] + n_weights, sizes_[l + 1]) += delta.rowwise().sum();
    if (l > 0) {
      Matrix upstream = weight(l).transpose() * delta;
      delta = upstream.array() * (1.0 - input.array().square());
    }
  }
}

}  // namespace spu::nn
