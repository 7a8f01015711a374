#pragma once

#include <Eigen/Dense>

#include <random>
#include <vector>

namespace spu::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/**
 * Fully connected network with tanh hidden layers and a linear output.
 *
 * Inputs and outputs are column-major batches: one column per sample.
 * Parameters live in a single flat vector, layer by layer, each layer
 * storing its out x in weight matrix (column-major) followed by its bias.
 */
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<int> layer_sizes);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  Eigen::Index num_params() const { return params_.size(); }

  const Vector& params() const { return params_; }
  void set_params(const Vector& params);

  /// Fan-in scaled uniform weights (variance gain^2 / fan_in), zero biases.
  void init(std::mt19937_64& rng, double hidden_gain, double output_gain);

  struct Cache {
    /// activations[0] is the input, activations[l] the output of layer l.
    std::vector<Matrix> activations;
  };

  Matrix forward(const Matrix& inputs, Cache* cache = nullptr) const;

  /// Adds dL/dparams to grad, given dL/doutput for every column of the batch.
  void backward(const Cache& cache, const Matrix& d_output, Eigen::Ref<Vector> grad) const;

 private:
  Eigen::Map<const Matrix> weight(int layer) const;
  Eigen::Map<const Vector> bias(int layer) const;

  std::vector<int> sizes_;
  std::vector<Eigen::Index> offsets_;
  Vector params_;
};

}  // namespace spu::nn
