#include "latinv/squashed_gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "latinv/error.hpp"

namespace latinv {

Real log_one_minus_tanh_sq(Real u) {
  // 1 - tanh^2(u) = 4 / (e^u + e^-u)^2
  const Real a = std::abs(u);
  return Real(2) * (std::numbers::ln2_v<Real> - a - std::log1p(std::exp(Real(-2) * a)));
}

SquashedSample squashed_gaussian_sample(std::span<const Real> mean, std::span<const Real> log_std,
                                        std::span<const Real> noise, LogStdRange range) {
  if (mean.size() != log_std.size() || mean.size() != noise.size()) {
    throw InvalidInput("squashed_gaussian_sample: mean/log_std/noise lengths differ");
  }
  const Real half_log_two_pi = Real(0.5) * std::log(Real(2) * std::numbers::pi_v<Real>);
  SquashedSample s;
  s.action.resize(mean.size());
  s.pre_tanh.resize(mean.size());
  s.std_dev.resize(mean.size());
  Real lp = 0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const Real ls = std::clamp(log_std[i], range.min, range.max);
    const Real sd = std::exp(ls);
    const Real u = mean[i] + sd * noise[i];
    Real a = std::tanh(u);
    // tanh rounds to +-1 for |u| > ~19; keep the action strictly interior.
    const Real edge = std::nextafter(Real(1), Real(0));
    a = std::clamp(a, -edge, edge);
    s.std_dev[i] = sd;
    s.pre_tanh[i] = u;
    s.action[i] = a;
    lp += -Real(0.5) * noise[i] * noise[i] - ls - half_log_two_pi - log_one_minus_tanh_sq(u);
  }
  s.log_prob = lp;
  return s;
}

}  // namespace latinv
