#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "latinv/mlp.hpp"
#include "latinv/tensor.hpp"

namespace latinv {

struct AdamState {
  std::vector<std::vector<Real>> first_moment;
  std::vector<std::vector<Real>> second_moment;
  std::uint64_t step_count = 0;
  Real learning_rate = Real(5e-4);
  Real beta1 = Real(0.9);
  Real beta2 = Real(0.999);
  Real numeric_eps = Real(1e-8);

  /// Zero moments shaped like `params`.
  static AdamState for_parameters(std::span<const std::span<const Real>> params, Real learning_rate);
  static AdamState for_network(const MlpNetwork& net, Real learning_rate);

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One bias-corrected Adam step. Throws NumericError (leaving params and
/// state untouched) if any gradient entry is NaN or infinite.
void adam_step(std::span<const std::span<Real>> params, std::span<const std::span<const Real>> grads,
               AdamState& state);

void adam_step(MlpNetwork& net, const MlpGradients& grads, AdamState& state);

}  // namespace latinv
