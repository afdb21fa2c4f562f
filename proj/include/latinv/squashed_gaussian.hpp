#pragma once

#include <span>
#include <vector>

#include "latinv/tensor.hpp"

namespace latinv {

struct LogStdRange {
  Real min = Real(-20);
  Real max = Real(2);
};

struct SquashedSample {
  std::vector<Real> action;    // tanh(pre_tanh), strictly inside (-1, 1)
  std::vector<Real> pre_tanh;  // mean + exp(log_std) * noise
  std::vector<Real> std_dev;   // exp of the clamped log_std
  Real log_prob = 0;           // log density of `action`, including the tanh Jacobian
};

/// Reparameterized draw from a tanh-squashed diagonal Gaussian.
SquashedSample squashed_gaussian_sample(std::span<const Real> mean, std::span<const Real> log_std,
                                        std::span<const Real> noise, LogStdRange range = {});

/// log(1 - tanh(u)^2), evaluated without cancellation for large |u|.
Real log_one_minus_tanh_sq(Real u);

}  // namespace latinv
