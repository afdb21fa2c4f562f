#include "latinv/mlp.hpp"

#include <cmath>
#include <string>

#include "latinv/error.hpp"

namespace latinv {

const char* to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + s + "'");
}

std::vector<std::span<const Real>> MlpGradients::spans() const {
  std::vector<std::span<const Real>> out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.emplace_back(weights[i].values);
    out.emplace_back(biases[i].values);
  }
  return out;
}

void MlpGradients::scale(Real factor) {
  for (auto& w : weights) as_eigen(w) *= factor;
  for (auto& b : biases) as_eigen(b) *= factor;
}

void MlpGradients::add(const MlpGradients& other) {
  if (other.weights.size() != weights.size()) throw InvalidInput("gradient sets differ in depth");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!weights[i].same_shape(other.weights[i]) || !biases[i].same_shape(other.biases[i])) {
      throw InvalidInput("gradient shapes differ");
    }
    as_eigen(weights[i]) += as_eigen(other.weights[i]);
    as_eigen(biases[i]) += as_eigen(other.biases[i]);
  }
}

bool MlpGradients::all_finite() const {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!weights[i].all_finite() || !biases[i].all_finite()) return false;
  }
  return true;
}

MlpNetwork::MlpNetwork(std::vector<std::size_t> layer_sizes, Activation hidden, Rng& rng, Real output_init)
    : sizes_(std::move(layer_sizes)), hidden_(hidden) {
  if (sizes_.size() < 2) throw InvalidInput("an MLP needs at least input and output sizes");
  for (auto s : sizes_) {
    if (s == 0) throw InvalidInput("layer sizes must be positive");
  }
  for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
    const bool last = i + 2 == sizes_.size();
    const Real bound = (last && output_init > 0) ? output_init : Real(1) / std::sqrt(static_cast<Real>(sizes_[i]));
    std::uniform_real_distribution<Real> u(-bound, bound);
    Matrix w(sizes_[i + 1], sizes_[i]);
    Matrix b(1, sizes_[i + 1]);
    for (auto& x : w.values) x = u(rng);
    for (auto& x : b.values) x = u(rng);
    weights_.push_back(std::move(w));
    biases_.push_back(std::move(b));
  }
}

MlpNetwork::MlpNetwork(std::vector<std::size_t> layer_sizes, Activation hidden, std::vector<Matrix> weights,
                       std::vector<Matrix> biases)
    : sizes_(std::move(layer_sizes)), hidden_(hidden), weights_(std::move(weights)), biases_(std::move(biases)) {
  validate();
}

void MlpNetwork::validate() const {
  if (sizes_.size() < 2) throw InvalidInput("an MLP needs at least input and output sizes");
  if (weights_.size() + 1 != sizes_.size() || biases_.size() != weights_.size()) {
    throw InvalidInput("layer count does not match layer_sizes");
  }
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (weights_[i].rows != sizes_[i + 1] || weights_[i].cols != sizes_[i]) {
      throw InvalidInput("weights[" + std::to_string(i) + "] has shape " + std::to_string(weights_[i].rows) + "x" +
                         std::to_string(weights_[i].cols) + ", expected " + std::to_string(sizes_[i + 1]) + "x" +
                         std::to_string(sizes_[i]));
    }
    if (biases_[i].rows != 1 || biases_[i].cols != sizes_[i + 1]) {
      throw InvalidInput("biases[" + std::to_string(i) + "] has the wrong shape");
    }
  }
}

ForwardRecord MlpNetwork::forward(const Matrix& batch) const {
  if (batch.cols != input_size()) {
    throw InvalidInput("mlp_forward: batch has " + std::to_string(batch.cols) + " columns, network expects " +
                       std::to_string(input_size()));
  }
  ForwardRecord rec;
  rec.layers.reserve(weights_.size() + 1);
  rec.layers.push_back(batch);
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const Matrix& in = rec.layers.back();
    Matrix out(in.rows, weights_[i].rows);
    auto o = as_eigen(out);
    o.noalias() = as_eigen(in) * as_eigen(weights_[i]).transpose();
    o.rowwise() += as_eigen(biases_[i]).row(0);
    if (i + 1 < weights_.size()) {
      if (hidden_ == Activation::relu) {
        o = o.cwiseMax(Real(0));
      } else {
        o = o.array().tanh().matrix();
      }
    }
    rec.layers.push_back(std::move(out));
  }
  return rec;
}

BackwardResult MlpNetwork::backward(const ForwardRecord& record, const Matrix& output_grad, bool with_params) const {
  if (record.layers.size() != sizes_.size()) throw InvalidInput("mlp_backward: activation record depth mismatch");
  const std::size_t n = record.layers.front().rows;
  for (std::size_t i = 0; i < sizes_.size(); ++i) {
    if (record.layers[i].cols != sizes_[i] || record.layers[i].rows != n) {
      throw InvalidInput("mlp_backward: activation record was not produced by this network");
    }
  }
  if (output_grad.rows != n || output_grad.cols != output_size()) {
    throw InvalidInput("mlp_backward: output gradient shape mismatch");
  }

  BackwardResult res;
  if (with_params) {
    res.params.weights.resize(weights_.size());
    res.params.biases.resize(weights_.size());
  }
  Matrix delta = output_grad;  // gradient w.r.t. the pre-activation of layer i
  for (std::size_t i = weights_.size(); i-- > 0;) {
    const Matrix& in = record.layers[i];
    if (with_params) {
      Matrix gw(weights_[i].rows, weights_[i].cols);
      as_eigen(gw).noalias() = as_eigen(delta).transpose() * as_eigen(in);
      // Fixed-order column sums: Eigen's vectorized reductions round
      // differently depending on buffer alignment.
      Matrix gb(1, weights_[i].rows);
      for (std::size_t r = 0; r < n; ++r) {
        const auto d = delta.row(r);
        for (std::size_t c = 0; c < gb.cols; ++c) gb.values[c] += d[c];
      }
      res.params.weights[i] = std::move(gw);
      res.params.biases[i] = std::move(gb);
    }
    Matrix prev(n, weights_[i].cols);
    as_eigen(prev).noalias() = as_eigen(delta) * as_eigen(weights_[i]);
    if (i > 0) {
      auto p = as_eigen(prev).array();
      auto act = as_eigen(in).array();
      if (hidden_ == Activation::relu) {
        p = p * (act > Real(0)).template cast<Real>();
      } else {
        p = p * (Real(1) - act.square());
      }
    }
    delta = std::move(prev);
  }
  res.input_grad = std::move(delta);
  return res;
}

std::size_t MlpNetwork::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < weights_.size(); ++i) n += weights_[i].size() + biases_[i].size();
  return n;
}

std::vector<std::span<Real>> MlpNetwork::parameters() {
  std::vector<std::span<Real>> out;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    out.emplace_back(weights_[i].values);
    out.emplace_back(biases_[i].values);
  }
  return out;
}

std::vector<std::span<const Real>> MlpNetwork::parameters() const {
  std::vector<std::span<const Real>> out;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    out.emplace_back(weights_[i].values);
    out.emplace_back(biases_[i].values);
  }
  return out;
}

bool MlpNetwork::all_finite() const {
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (!weights_[i].all_finite() || !biases_[i].all_finite()) return false;
  }
  return true;
}

}  // namespace latinv
