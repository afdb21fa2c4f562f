#include "latinv/adam.hpp"

#include <cmath>
#include <string>

#include "latinv/error.hpp"

namespace latinv {

AdamState AdamState::for_parameters(std::span<const std::span<const Real>> params, Real learning_rate) {
  AdamState s;
  s.learning_rate = learning_rate;
  for (auto p : params) {
    s.first_moment.emplace_back(p.size(), Real(0));
    s.second_moment.emplace_back(p.size(), Real(0));
  }
  return s;
}

AdamState AdamState::for_network(const MlpNetwork& net, Real learning_rate) {
  auto params = net.parameters();
  return for_parameters(params, learning_rate);
}

void adam_step(std::span<const std::span<Real>> params, std::span<const std::span<const Real>> grads,
               AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw InvalidInput("adam_step: parameter/gradient/state group counts differ");
  }
  for (std::size_t g = 0; g < params.size(); ++g) {
    if (params[g].size() != grads[g].size() || params[g].size() != state.first_moment[g].size()) {
      throw InvalidInput("adam_step: shape mismatch in group " + std::to_string(g));
    }
    for (std::size_t i = 0; i < grads[g].size(); ++i) {
      if (!std::isfinite(grads[g][i])) {
        throw NumericError("adam_step: non-finite gradient in group " + std::to_string(g) + " at index " +
                           std::to_string(i));
      }
    }
  }

  state.step_count += 1;
  const auto t = static_cast<Real>(state.step_count);
  const Real bc1 = Real(1) - std::pow(state.beta1, t);
  const Real bc2 = Real(1) - std::pow(state.beta2, t);
  for (std::size_t g = 0; g < params.size(); ++g) {
    auto& m = state.first_moment[g];
    auto& v = state.second_moment[g];
    auto p = params[g];
    auto gr = grads[g];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (Real(1) - state.beta1) * gr[i];
      v[i] = state.beta2 * v[i] + (Real(1) - state.beta2) * gr[i] * gr[i];
      const Real m_hat = m[i] / bc1;
      const Real v_hat = v[i] / bc2;
      p[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.numeric_eps);
    }
  }
}

void adam_step(MlpNetwork& net, const MlpGradients& grads, AdamState& state) {
  auto params = net.parameters();
  auto g = grads.spans();
  adam_step(params, g, state);
}

}  // namespace latinv
