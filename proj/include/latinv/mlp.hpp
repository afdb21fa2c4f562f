#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "latinv/random.hpp"
#include "latinv/tensor.hpp"

namespace latinv {

enum class Activation { relu, tanh };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Values retained by a forward pass. `layers[0]` is the input batch and
/// `layers[i + 1]` the post-activation output of layer i (the last entry is
/// the linear network output).
struct ForwardRecord {
  std::vector<Matrix> layers;
  const Matrix& output() const { return layers.back(); }
};

struct MlpGradients {
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;

  std::vector<std::span<const Real>> spans() const;
  void scale(Real factor);
  void add(const MlpGradients& other);
  bool all_finite() const;
};

struct BackwardResult {
  MlpGradients params;
  Matrix input_grad;
};

/// Fully connected feed-forward network with a linear output layer.
/// weights[i] is layer_sizes[i+1] x layer_sizes[i]; biases[i] is 1 x layer_sizes[i+1].
class MlpNetwork {
 public:
  MlpNetwork() = default;

  /// Uniform(+-1/sqrt(fan_in)) initialization; the output layer is drawn from
  /// Uniform(+-output_init) instead when output_init > 0.
  MlpNetwork(std::vector<std::size_t> layer_sizes, Activation hidden, Rng& rng, Real output_init = Real(0));

  /// Builds a network from explicit parameters (shapes validated).
  MlpNetwork(std::vector<std::size_t> layer_sizes, Activation hidden, std::vector<Matrix> weights,
             std::vector<Matrix> biases);

  ForwardRecord forward(const Matrix& batch) const;
  Matrix predict(const Matrix& batch) const { return forward(batch).output(); }

  /// Reverse-mode pass. Parameter gradients are skipped when `with_params`
  /// is false (only the input gradient is needed when backpropagating a
  /// critic into the policy).
  BackwardResult backward(const ForwardRecord& record, const Matrix& output_grad, bool with_params = true) const;

  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::size_t num_layers() const { return weights_.size(); }
  std::size_t parameter_count() const;
  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  Activation hidden_activation() const { return hidden_; }

  const Matrix& weights(std::size_t layer) const { return weights_.at(layer); }
  const Matrix& biases(std::size_t layer) const { return biases_.at(layer); }

  /// Parameter views in a fixed order: w0, b0, w1, b1, ...
  std::vector<std::span<Real>> parameters();
  std::vector<std::span<const Real>> parameters() const;

  bool all_finite() const;
  bool same_shape(const MlpNetwork& other) const { return sizes_ == other.sizes_; }

  friend bool operator==(const MlpNetwork&, const MlpNetwork&) = default;

 private:
  void validate() const;

  std::vector<std::size_t> sizes_;
  Activation hidden_ = Activation::relu;
  std::vector<Matrix> weights_;
  std::vector<Matrix> biases_;
};

}  // namespace latinv
