#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "latinv/oracle.hpp"
#include "latinv/random.hpp"
#include "latinv/tensor.hpp"

namespace latinv {

/// A point in the k-dimensional latent space; states and actions share it.
using LatentVector = std::vector<Real>;

struct RewardWeights {
  Real state = Real(2);   // w1
  Real action = Real(2);  // w2
  Real margin = Real(8);  // w3

  friend bool operator==(const RewardWeights&, const RewardWeights&) = default;
};

struct EnvConfig {
  std::size_t latent_dim = 16;   // k
  std::size_t num_classes = 10;  // K
  std::size_t target_class = 0;  // y
  Real alpha = Real(0);          // diversity factor
  RewardWeights weights;
  Real epsilon = Real(1e-7);
  std::size_t max_step = 1;
  Real action_scale = Real(1);
  // With alpha == 0 the next state equals the action; skip the second query.
  bool dedup_queries = false;

  /// Throws ConfigError on any violated range.
  void validate() const;

  friend bool operator==(const EnvConfig&, const EnvConfig&) = default;
};

struct RewardTerms {
  Real state_score = 0;   // r1
  Real action_score = 0;  // r2
  Real margin_score = 0;  // r3
};

struct StepOutcome {
  LatentVector next_state;
  Real reward = 0;
  bool done = false;
  RewardTerms terms;
  std::vector<Real> state_confidences;
  std::vector<Real> action_confidences;
  std::uint64_t queries_spent = 0;
};

/// s0 ~ N(0, I_k).
LatentVector init_state(std::size_t k, Rng& rng);

/// alpha * s + (1 - alpha) * a.
LatentVector transition(std::span<const Real> state, std::span<const Real> action, Real alpha);

/// r1 = log max(eps, c_s[y]); r2 = log max(eps, c_a[y]);
/// r3 = log max(eps, c_s[y] - max_{i != y} c_s[i]).
RewardTerms reward_terms(std::span<const Real> state_conf, std::span<const Real> action_conf, std::size_t target,
                         Real epsilon);

Real total_reward(const RewardTerms& r, const RewardWeights& w);

/// One MDP step against `oracle`. `step_index` is 1-based; the step is
/// terminal when it equals config.max_step.
StepOutcome env_step(std::span<const Real> state, std::span<const Real> action, Oracle& oracle,
                     const EnvConfig& config, std::size_t step_index, QueryPurpose purpose = QueryPurpose::training);

}  // namespace latinv
